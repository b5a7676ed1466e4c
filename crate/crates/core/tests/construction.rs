use rug::Float;

use harmzero::assembly::eval_g;
use harmzero::certify::count_zeros_on_line;
use harmzero::{build_construction, Construction, DyadicRational};

fn reference() -> Construction {
    build_construction(&[1, 2, 3, 4], &Float::with_val(256, 0.5), 4, 256).unwrap()
}

fn close(x: &Float, expected: f64) -> bool {
    (x.to_f64() / expected - 1.0).abs() < 1e-6
}

#[test]
fn reference_values() {
    let constr = reference();
    let expected = [
        (1.444983e-9, 6.860524e-11),
        (1.646947e-35, 4.322773e-38),
        (2.235501e-91, 3.376624e-95),
        (3.875247e-189, 3.157996e-194),
    ];
    for (level, (a, m)) in constr.levels().iter().zip(expected) {
        assert!(close(&level.amplitude, a), "a_{} = {}", level.k, level.amplitude.to_f64());
        assert!(close(&level.margin, m), "m_{} = {}", level.k, level.margin.to_f64());
        assert_eq!(level.c, level.k + 1);
    }
    // amplitudes sit at the cap for this sequence
    assert!(constr.levels().iter().all(|l| l.amplitude == l.cap));
}

#[test]
fn builds_are_reproducible() {
    let a = reference();
    let b = reference();
    assert_eq!(a.to_json_compact(), b.to_json_compact());
    let reloaded = Construction::from_json(&a.to_json_pretty()).unwrap();
    assert_eq!(reloaded.hash_hex(), a.hash_hex());
    assert_eq!(a.hash_hex().len(), 64);
}

#[test]
fn roots_sit_near_the_predicted_ordinates() {
    let constr = reference();
    let prec = constr.precision();
    for k in 1..=4u32 {
        let level = constr.level(k).unwrap();
        let tail = &constr.tail_bound(k).unwrap().value;
        let xi = level.block.xi_points(prec);
        let certs = count_zeros_on_line(&constr, k).unwrap();
        assert_eq!(certs.len(), xi.len());
        for (cert, point) in certs.iter().zip(&xi) {
            let allowed = Float::with_val(prec, tail / &cert.derivative_bound) + cert.bracket_width();
            let gap = Float::with_val(prec, &cert.refined_root - &point.y.value).abs();
            assert!(gap <= allowed, "k={k} j={} gap {} > {}", point.j, gap.to_f64(), allowed.to_f64());
        }
    }
}

#[test]
fn certificates_reevaluate_with_opposite_signs() {
    let constr = reference();
    for k in 1..=4u32 {
        for cert in count_zeros_on_line(&constr, k).unwrap() {
            let x = DyadicRational::from_int(cert.line_x);
            let lo = eval_g(&constr, &x, &cert.y_lo).unwrap();
            let hi = eval_g(&constr, &x, &cert.y_hi).unwrap();
            let (slo, shi) = (lo.certified_sign().unwrap(), hi.certified_sign().unwrap());
            assert_ne!(slo, shi);
            assert!(lo.value.cmp_abs(&lo.total_err()) == Some(std::cmp::Ordering::Greater));
            assert!(hi.value.cmp_abs(&hi.total_err()) == Some(std::cmp::Ordering::Greater));
            assert!(cert.is_regular());
        }
    }
}
