use crate::nn::ParamVector;

/// Heavy-ball SGD: `buf ← μ·buf + g`, `θ ← θ - lr·buf`.
///
/// With a zero initial buffer the first step is plain SGD.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    buffer: ParamVector,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64, buffer: ParamVector) -> Self {
        SgdMomentum { lr, momentum, buffer }
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) {
        if self.momentum == 0.0 {
            params.axpy(-self.lr, grad);
            return;
        }
        self.buffer.scale(self.momentum);
        self.buffer.add_assign(grad);
        params.axpy(-self.lr, &self.buffer);
    }

    pub fn into_buffer(self) -> ParamVector {
        self.buffer
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_accumulates() {
        let mut p = ParamVector::from_vec(vec![1.0]);
        let mut opt = SgdMomentum::new(0.5, 0.5, ParamVector::zeros(1));
        let g = ParamVector::from_vec(vec![2.0]);
        opt.step(&mut p, &g);
        assert_eq!(p[0], 0.0);
        opt.step(&mut p, &g);
        // buf = 0.5·2 + 2 = 3
        assert_eq!(p[0], -1.5);
    }
}
