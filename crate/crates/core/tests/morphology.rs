use proptest::prelude::*;
use pseudolabel::maps::Mask;
use pseudolabel::morphology::{dilate, element_extent};

fn brute(mask: &Mask, r: usize) -> Mask {
    let (before, after) = element_extent(r);
    let (h, w) = (mask.height(), mask.width());
    let mut out = Mask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            let y0 = y.saturating_sub(before);
            let x0 = x.saturating_sub(before);
            let hit = (y0..=(y + after).min(h - 1))
                .any(|yy| (x0..=(x + after).min(w - 1)).any(|xx| mask.get(yy, xx)));
            out.set(y, x, hit);
        }
    }
    out
}

fn mask_strategy() -> impl Strategy<Value = Mask> {
    (1usize..=20, 1usize..=20).prop_flat_map(|(h, w)| {
        proptest::collection::vec(proptest::bool::weighted(0.15), h * w)
            .prop_map(move |bits| Mask::new(h, w, bits).unwrap())
    })
}

#[test]
fn element_is_centred() {
    assert_eq!(element_extent(1), (0, 0));
    assert_eq!(element_extent(3), (1, 1));
    assert_eq!(element_extent(4), (1, 2));
    assert_eq!(element_extent(30), (14, 15));
}

#[test]
fn full_image_dilation() {
    let mut m = Mask::empty(9, 9);
    m.set(0, 0, true);
    assert_eq!(dilate(&m, 17).unwrap().count(), 81);
    assert_eq!(dilate(&m, 3).unwrap().count(), 4);
}

#[test]
fn zero_kernel_rejected() {
    assert!(dilate(&Mask::empty(2, 2), 0).is_err());
}

proptest! {
    #[test]
    fn matches_brute_force(mask in mask_strategy(), r in 1usize..=12) {
        prop_assert_eq!(dilate(&mask, r).unwrap(), brute(&mask, r));
    }

    #[test]
    fn extensive(mask in mask_strategy(), r in 1usize..=12) {
        prop_assert!(mask.is_subset_of(&dilate(&mask, r).unwrap()));
    }

    #[test]
    fn monotone_in_kernel(mask in mask_strategy(), r in 1usize..=12, extra in 0usize..=6) {
        let small = dilate(&mask, r).unwrap();
        prop_assert!(small.is_subset_of(&dilate(&mask, r + extra).unwrap()));
    }

    #[test]
    fn monotone_in_mask(mask in mask_strategy(), r in 1usize..=9) {
        let mut grown = mask.clone();
        grown.set(0, 0, true);
        prop_assert!(dilate(&mask, r).unwrap().is_subset_of(&dilate(&grown, r).unwrap()));
    }
}
