use super::{Gradients, NumericsError, Optimizer, Tape, Tensor, Var};

/// A fixed, ordered list of trainable tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Tensor>;

    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    /// Binds every tensor as a trainable leaf, in `tensors()` order.
    fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors().into_iter().map(|t| tape.var(t.clone())).collect()
    }

    /// Binds every tensor as a constant.
    fn bind_frozen<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.tensors().into_iter().map(|t| tape.constant(t.clone())).collect()
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Optimizer {
    /// One step on `params` using the gradients of the leaves `vars`
    /// produced by [`Parameters::bind`].
    pub fn apply<P: Parameters + ?Sized>(
        &mut self,
        params: &mut P,
        vars: &[Var<'_>],
        grads: &Gradients,
    ) -> Result<(), NumericsError> {
        let g: Vec<Tensor> = vars.iter().map(|&v| grads.get_or_zeros(v)).collect();
        let mut tensors = params.tensors_mut();
        if tensors.len() != g.len() {
            return Err(NumericsError::InvalidParameter {
                name: "bound variables",
                value: g.len() as f64,
            });
        }
        self.step(&mut tensors, &g)
    }
}
