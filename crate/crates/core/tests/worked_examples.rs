use num_bigint::BigUint;
use temporal_core::accumulators::{accumulate_analog, accumulate_digital, convert_reference, toggle_chain};
use temporal_core::arith::{add_concat, demux, madd, max_race, min_race, mul_dilate, mux, mv_merge, mv_place, TuplePair};
use temporal_core::channel::{
    deliver_parallel, negotiate_reference, parse_stream, serialize_stream, transmit_checked, Latency, LatencyTable, Link,
    TimedMessage,
};
use temporal_core::codes::{decode_hybrid, decode_pim, decode_unary, encode_hybrid, encode_pim, encode_unary, measure_interval};
use temporal_core::time::parse_rational;
use temporal_core::{ClockRef, DeliveryMode, IntervalValue, MultiValentTrain, PulseTrain, Rational, Tick};

fn f() -> ClockRef {
    ClockRef::unit("f")
}

fn hz(id: &str, r: &str) -> ClockRef {
    ClockRef::new(id, parse_rational(r).unwrap()).unwrap()
}

fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

fn ticks(t: &PulseTrain) -> Vec<u64> {
    t.pulses().iter().map(|p| p.0).collect()
}

fn iv(start: u64, end: u64, clock: ClockRef) -> IntervalValue {
    IntervalValue::new(Tick(start), Tick(end), clock).unwrap()
}

fn mv(pairs: &[(u64, u64)]) -> MultiValentTrain {
    MultiValentTrain::new(pairs.iter().map(|&(p, a)| (Tick(p), a)), f()).unwrap()
}

#[test]
fn unary_and_interval_codes_of_seven() {
    let u = encode_unary(7u32, &f());
    assert_eq!(u.length(), &big(7));
    assert_eq!(decode_unary(&u), big(7));
    assert_eq!(ticks(&encode_pim(7, &f())), [0, 7]);
    assert_eq!(ticks(&encode_pim(5, &f())), [0, 5]);
    assert_eq!(decode_pim(&PulseTrain::new(vec![Tick(0), Tick(7)], f()).unwrap()).unwrap(), 7);
    for n in 0..=10_000u64 {
        assert_eq!(decode_unary(&encode_unary(n, &f())), big(n));
    }
}

#[test]
fn measuring_against_other_references() {
    let x = iv(0, 5, f());
    assert_eq!(measure_interval(&x, &hz("3f", "3")), big(15));
    assert_eq!(measure_interval(&x, &hz("half", "1/2")), big(2));
}

#[test]
fn hybrid_digits() {
    let d = encode_hybrid(&big(23), 10, &f()).unwrap();
    let lengths: Vec<BigUint> = d.iter().map(|t| t.length().clone()).collect();
    assert_eq!(lengths, [big(3), big(2)]);
    let digits = [encode_unary(3u32, &f()), encode_unary(2u32, &f())];
    assert_eq!(decode_hybrid(&digits, 10).unwrap(), big(23));
}

#[test]
fn add_mul_and_races() {
    assert_eq!(add_concat(&encode_unary(3u32, &f()), &encode_unary(4u32, &f())).unwrap().length(), &big(7));
    assert_eq!(mul_dilate(&encode_unary(5u32, &f()), &big(3)).unwrap().length(), &big(15));
    let lanes = deliver_parallel(&[5, 7], DeliveryMode::ParallelSynchronous, None, &f()).unwrap();
    assert_eq!(min_race(&lanes, DeliveryMode::ParallelSynchronous).unwrap(), 5);
    assert_eq!(max_race(&lanes, DeliveryMode::ParallelSynchronous).unwrap(), 7);
}

#[test]
fn multiplexing() {
    assert_eq!(ticks(&mux(&[5, 7], &f()).unwrap().to_train()), [0, 5, 7]);
    // OR of the individual interval codes
    let expected = [3, 5, 7, 11]
        .iter()
        .map(|&v| encode_pim(v, &f()))
        .reduce(|a, b| a.or(&b))
        .unwrap();
    assert_eq!(mux(&[3, 5, 7, 11], &f()).unwrap().to_train(), expected);
    let t = PulseTrain::new(vec![Tick(0), Tick(5), Tick(7)], f()).unwrap();
    assert_eq!(demux(&t).unwrap().into_iter().collect::<Vec<_>>(), [5, 7]);
}

#[test]
fn multi_valent_placement_and_madd() {
    assert_eq!(mv_place(TuplePair::new(3, 5).unwrap(), &f()), mv(&[(5, 3)]));
    assert_eq!(mv_place(TuplePair::new(4, 3).unwrap(), &f()), mv(&[(3, 4)]));
    let merged = mv_merge(&[mv(&[(2, 3)]), mv(&[(3, 4)])]).unwrap();
    assert_eq!(merged, mv(&[(2, 3), (3, 4)]));
    assert_eq!(madd(&merged), big(18));
    let same = mv_merge(&[mv(&[(4, 2)]), mv(&[(4, 5)])]).unwrap();
    assert_eq!(same, mv(&[(4, 7)]));
    assert_eq!(madd(&same), big(4 * 2 + 4 * 5));
    assert_eq!(madd(&mv(&[(5, 3)])), big(15));
}

#[test]
fn accumulator_examples() {
    assert_eq!(accumulate_digital(&iv(0, 7, f()), &f()), big(7));
    assert_eq!(accumulate_digital(&iv(0, 5, f()), &hz("3f", "3")), big(15));
    assert_eq!(toggle_chain(&big(7), 3).unwrap().bits(), [true, true, true]);
    assert_eq!(toggle_chain(&big(18), 4).unwrap().bits(), [false, true, false, false]);
    let r = accumulate_analog(&iv(0, 5, f()), &f(), &parse_rational("3").unwrap()).unwrap();
    assert_eq!(r.charge, Rational::from_integer(big(15)));
    let r = accumulate_analog(&iv(0, 4, f()), &f(), &parse_rational("1/3").unwrap()).unwrap();
    assert_eq!(r.charge, parse_rational("4/3").unwrap());
    assert_eq!(r.value, big(1));
    assert_eq!(convert_reference(&big(5), &f(), &hz("3f", "3")), big(15));
    assert_eq!(convert_reference(&big(7), &hz("3f", "3"), &hz("2f", "2")), big(4));
}

#[test]
fn stability_examples() {
    let msg = TimedMessage::interval(&iv(0, 7, f()));
    let table = LatencyTable::new([(Tick(0), 5), (Tick(7), 8)]);
    let v = transmit_checked(&msg, &Link::shared(Latency::Table(table), f())).unwrap_err();
    assert_eq!(v.distorted_value, 10);
    assert_eq!(v.error, 3);
    // varies only between the two events
    let table = LatencyTable::new([(Tick(0), 5), (Tick(3), 40), (Tick(6), 5)]);
    let out = transmit_checked(&msg, &Link::shared(Latency::Table(table), f())).unwrap();
    assert_eq!(out.decode_interval().unwrap(), 7);
}

#[test]
fn exchange_rates() {
    assert_eq!(negotiate_reference(&f(), &hz("3f", "3")), parse_rational("3").unwrap());
    assert_eq!(negotiate_reference(&hz("6f", "6"), &hz("4f", "4")), parse_rational("2/3").unwrap());
}

#[test]
fn stream_layouts() {
    let t = serialize_stream(&[3, 4], DeliveryMode::Serial, None, &f()).unwrap();
    assert_eq!(ticks(&t), [0, 3, 7]);
    assert_eq!(parse_stream(&t, DeliveryMode::Serial).unwrap(), [3, 4]);
    assert_eq!(t.pulses().last().unwrap().0, 7);
    let t = serialize_stream(&[5, 2], DeliveryMode::SerialDiscontinuous, Some(&[4]), &f()).unwrap();
    assert_eq!(ticks(&t), [0, 5, 9, 11]);
}

#[test]
fn parallel_lanes() {
    let lanes = deliver_parallel(&[5, 7], DeliveryMode::ParallelSynchronous, None, &f()).unwrap();
    assert_eq!(lanes, [iv(0, 5, f()), iv(0, 7, f())]);
    let lanes = deliver_parallel(&[5, 7], DeliveryMode::ParallelAsynchronous, Some(&[Tick(2), Tick(0)]), &f()).unwrap();
    assert_eq!(lanes, [iv(2, 7, f()), iv(0, 7, f())]);
}
