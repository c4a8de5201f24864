mod oracle;

use flagseq_core::apmm::MajorizerRule;
use flagseq_core::DesignConfig;
use oracle::cases;
use oracle::checks::*;

#[test]
fn dense_and_fast_paths_agree() {
    for (d, c) in cases(16) {
        for sym in [false, true] {
            let c = DesignConfig { symmetric: sym, ..c };
            let d = if sym { d.with_peaks(&oracle::checks_peaks(&d), &oracle::checks_peaks(&d)) } else { d.clone() };
            let e = equivalence(&d, &c, 7);
            assert!(e.worst() < 1e-9, "{c:?} {e:?}");
        }
    }
}

#[test]
fn block_surrogates_dominate() {
    for (d, c) in cases(8) {
        for rule in [MajorizerRule::Block, MajorizerRule::Lifted] {
            for dom in [rx_dominance(&d, &c, rule, 50, 11), tx_dominance(&d, &c, rule, 50, 12)] {
                assert!(dom.min_gap >= -1e-12, "{rule:?} {dom:?}");
                assert!(dom.touch < 1e-9, "{dom:?}");
                assert!(dom.update < 1e-9, "{dom:?}");
                assert!(dom.curvature_margin >= -1e-9, "{rule:?} {dom:?}");
            }
        }
    }
}

#[test]
fn symmetric_surrogate_dominates() {
    for (d, c) in cases(8) {
        let c = DesignConfig { symmetric: true, ..c };
        let dom = symmetric_dominance(&d, &c, 50, 13);
        assert!(dom.min_gap >= -1e-12, "{dom:?}");
        assert!(dom.touch < 1e-9, "{dom:?}");
        assert!(dom.update < 1e-9, "{dom:?}");
        assert!(dom.curvature_margin >= -1e-9, "{dom:?}");
    }
}
