//! Finite-difference stencils on uniform grids.
//!
//! Interior rows are centered and at least fourth-order accurate; rows near
//! the window ends reuse the same width shifted to be one-sided.

/// Fornberg's recursion: weights for derivatives `0..=max_order` at `z`
/// using the given nodes. Returns `weights[order][node]`.
pub fn fornberg(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Half-width of the stencil used for the `order`-th derivative.
pub fn half_width(order: usize) -> usize {
    if order == 0 {
        0
    } else {
        order.div_ceil(2) + 1
    }
}

/// Applies the `order`-th derivative stencil with spacing `h`.
pub fn derivative(values: &[f64], order: usize, h: f64) -> Vec<f64> {
    if order == 0 {
        return values.to_vec();
    }
    let n = values.len();
    let p = half_width(order);
    let width = 2 * p + 1;
    if n < width {
        return vec![0.0; n];
    }
    let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
    let scale = h.powi(-(order as i32));
    let interior = fornberg(p as f64, &nodes, order)[order].clone();
    let mut edge_rows: Vec<Vec<f64>> = Vec::with_capacity(width);
    for pos in 0..width {
        edge_rows.push(fornberg(pos as f64, &nodes, order)[order].clone());
    }
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let (start, row) = if i < p {
            (0, &edge_rows[i])
        } else if i + p >= n {
            let start = n - width;
            (start, &edge_rows[i - start])
        } else {
            (i - p, &interior)
        };
        let mut acc = 0.0;
        for (k, w) in row.iter().enumerate() {
            acc += w * values[start + k];
        }
        *o = acc * scale;
    }
    out
}

/// Periodic centered derivative (used for loop fixtures when a spectral
/// derivative is not wanted).
pub fn periodic_derivative(values: &[f64], order: usize, h: f64) -> Vec<f64> {
    if order == 0 {
        return values.to_vec();
    }
    let n = values.len();
    let p = half_width(order);
    let width = 2 * p + 1;
    let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
    let row = fornberg(p as f64, &nodes, order)[order].clone();
    let scale = h.powi(-(order as i32));
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, w) in row.iter().enumerate() {
                let idx = (i + n + k - p) % n;
                acc += w * values[idx];
            }
            acc * scale
        })
        .collect()
}
