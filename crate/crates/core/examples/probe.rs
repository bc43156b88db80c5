use plugpull::config::ScenarioConfig;
use plugpull::scenario;

fn main() {
    let cfg = ScenarioConfig::default();
    let t0 = std::time::Instant::now();
    match scenario::run(&cfg) {
        Err(e) => println!("ERROR: {e}"),
        Ok(art) => {
            println!("elapsed: {:?}", t0.elapsed());
            println!("s_max = {:?}", art.s_max);
            print!("{}", scenario::summary_text(&art));
            // pitch at separation
            if let Some(tsep) = art.trace.summary.separation_time {
                let rec = art.trace.records.iter().filter(|r| r.t <= tsep + 1e-9)
                    .last().unwrap();
                println!("pitch at separation = {:.3} deg", rec.q[4].to_degrees());
                println!("F_E,1 at separation = {:.4} N, thrust = {:.3} N", rec.f_e[0], rec.thrust);
            }
            let n = art.trace.records.len();
            let last = &art.trace.records[n-1];
            println!("final pos = ({:.4}, {:.4}, {:.4}) t={:.3}", last.q[0], last.q[1], last.q[2], last.t);
            // peak u_eta for s_max sense
            let mut sup=[0.0f64;3];
            for r in &art.trace.records { for i in 0..3 { sup[i]=sup[i].max(r.u_eta[i].abs()); } }
            println!("sup|u_eta| = {:?}", sup);
        }
    }
}
