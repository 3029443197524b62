//! Reads a WS-Dream style dataset (response-time matrix plus user and
//! service metadata lists) and splits it by training density.

use std::fs;

use pdsnet::dataio::{load_wsdream, positive_entries, read_rt_matrix, split_by_density, Encoder, SplitManifest, SplitSpec};

const RT: &str = "0.5\t-1\t1.2\t0.3\n2.0\t0.8\t-1\t0.0\n0.4\t0.6\t0.9\t1.1\n";
const USERS: &str = "[User ID]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]
0\t12.108.127.138\tUnited States\t208437130\tAS7018 AT&T Services, Inc.\t38\t-97
1\t12.46.129.15\tUnited States\t204374287\tAS7018 AT&T Services, Inc.\t38.0464\t-122.23
2\t122.1.115.91\tJapan\t2046915419\tAS4713 NTT Communications Corporation\t35.685\t139.7514
";
const SERVICES: &str = "[Service ID]\t[WSDL Address]\t[Service Provider]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]
0\thttp://a.example/?wsdl\ta.example\t1.2.3.4\tGermany\t1\tAS3320 Deutsche Telekom AG\t51\t9
1\thttp://b.example/?wsdl\tb.example\t5.6.7.8\tJapan\t2\tAS4713 NTT Communications Corporation\t35\t139
2\thttp://c.example/?wsdl\tc.example\t9.9.9.9\t\t3\t\t0\t0
3\thttp://d.example/?wsdl\td.example\t8.8.8.8\tUnited States\t4\tAS15169 Google Inc.\t37\t-122
";

fn main() -> pdsnet::Result<()> {
    let dir = std::env::temp_dir().join("pdsnet-wsdream-example");
    fs::create_dir_all(&dir).map_err(|e| pdsnet::Error::io(&dir, e))?;
    for (name, text) in [("rtMatrix.txt", RT), ("userlist.txt", USERS), ("wslist.txt", SERVICES)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| pdsnet::Error::io(&p, e))?;
    }

    let matrix = read_rt_matrix(RT.as_bytes())?;
    let records = load_wsdream(&dir.join("rtMatrix.txt"), &dir.join("userlist.txt"), &dir.join("wslist.txt"))?;
    println!("{} positive entries, {} records", positive_entries(&matrix), records.len());
    assert_eq!(positive_entries(&matrix), records.len());
    for r in records.iter().take(3) {
        println!("{r:?}");
    }

    let encoder = Encoder::fit(&records);
    println!("vocabulary sizes (MISSING included): {:?}", encoder.sizes());
    let spec = SplitSpec::density(0.3, 1)?;
    let split = split_by_density(records.len(), &spec)?;
    println!("train {:?} test {:?} validation {:?}", split.train, split.test, split.validation);
    let manifest = SplitManifest::new(&spec, &split);
    print!("{}", manifest.to_toml()?);
    Ok(())
}
