//! Reference models used throughout the tests and the fixture suite.

use crate::kernel::KernelModel;

/// Two communities with `C = [[1/2, 1/4], [1/4, 3/8]]`, `P = (1/3, 2/3)`.
/// Both degrees equal 1/3, so the constant function is an eigenfunction.
pub fn two_block_sbm() -> KernelModel {
    KernelModel::sbm(
        vec![vec![0.5, 0.25], vec![0.25, 0.375]],
        vec![1.0 / 3.0, 2.0 / 3.0],
    )
    .expect("fixture is valid")
}

/// Four communities, uniform `P`, only communities 0 and 1 connected
/// (`C[0][1] = C[1][0] = 1`). Communities 2 and 3 are isolated.
pub fn four_block_sbm() -> KernelModel {
    let mut c = vec![vec![0.0; 4]; 4];
    c[0][1] = 1.0;
    c[1][0] = 1.0;
    KernelModel::sbm(c, vec![0.25; 4]).expect("fixture is valid")
}

/// Gaussian kernel with bandwidth 0.5 on `[-1, 1]`, uniform `P`.
pub fn gaussian() -> KernelModel {
    KernelModel::gaussian(crate::kernel::DEFAULT_BANDWIDTH).expect("fixture is valid")
}
