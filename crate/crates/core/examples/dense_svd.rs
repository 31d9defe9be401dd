//! Complex tensor contraction and a truncated SVD.

use tnlearn::{DenseTensor, Result, C64};

fn main() -> Result<()> {
    let a = DenseTensor::from_fn(&[4, 3], |i| C64::new((i[0] + 2 * i[1]) as f64, i[0] as f64 - i[1] as f64));
    let b = DenseTensor::from_fn(&[3, 2], |i| C64::new(1.0, (i[0] * i[1]) as f64));

    let ab = a.contract(&b, &[(1, 0)])?;
    println!("A[4,3] . B[3,2] -> {:?}", ab.shape());

    let svd = a.svd()?;
    println!("singular values of A: {:.4?}", svd.s);
    for keep in 1..=svd.rank() {
        let err = svd.reconstruct(keep).max_abs_diff(&a);
        println!("rank {keep} reconstruction error {err:.2e}");
    }
    Ok(())
}
