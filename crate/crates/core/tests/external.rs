mod support;

use std::io::BufReader;
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use inrob_core::harness::{serve_mil, ExternalSubject};
use inrob_core::testgen::parse_suite;
use inrob_core::{execute_case, parse_network, MilInterpreter, Outcome, Role};
use support::asset;

const UNIT: Duration = Duration::from_millis(5);

const CASES: &str = "suite obdh_slp nominal 2 robustness 0
case obdh_slp:start_acknowledged kind nominal purpose start_acknowledged sut slave
  stim cmd_start after 0 payload a1e8070a100c1e00
  expect ack emit payload 06 within 0..1
end
case obdh_slp:data_sent kind nominal purpose data_sent sut slave
  stim cmd_start after 0 payload a1e8070a100c1e00
  expect ack emit payload 06 within 0..1
  stim req_data after 301 payload a2
  expect data emit payload 5a000102 within 0..1
end
";

#[test]
fn model_served_over_tcp_passes() {
    let net = parse_network(&asset("obdh_slp.tioa")).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let served = net.clone();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        stream.set_nodelay(true).unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        serve_mil(Box::new(MilInterpreter::new(&served, Role::Slave)), reader, stream, UNIT)
    });

    let suite = parse_suite(CASES).unwrap();
    {
        let mut sut = ExternalSubject::connect(&addr, UNIT).unwrap();
        for case in &suite.cases {
            let v = execute_case(case, &net, &mut sut, None).unwrap();
            assert_eq!(v.outcome, Outcome::Pass, "{}: {:?}\n{:?}", case.id, v.reason, v.log);
        }
    }
    server.join().unwrap().unwrap();
}

#[test]
fn missing_ready_is_a_setup_error() {
    let net = parse_network(&asset("obdh_slp.tioa")).unwrap();
    let suite = parse_suite(CASES).unwrap();
    let mut sut = ExternalSubject::spawn("true", UNIT).unwrap();
    let err = execute_case(&suite.cases[0], &net, &mut sut, None).unwrap_err();
    assert!(err.to_string().contains("stdio:true"), "{err}");
}
