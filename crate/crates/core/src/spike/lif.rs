use super::{Fixed, SpikeError, RAW_LIMIT};

/// Membrane potentials of a population of LIF neurons sharing one threshold
/// and leak factor.
///
/// Update rule per step: `V <- round(leak * V) + I`; the neuron fires iff
/// `V >= threshold`, after which `V` is hard-reset to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembraneState {
    potentials: Vec<Fixed>,
    threshold: Fixed,
    leak: Fixed,
}

impl MembraneState {
    pub fn new(neurons: usize, threshold: Fixed, leak: Fixed) -> Self {
        Self {
            potentials: vec![Fixed::ZERO; neurons],
            threshold,
            leak,
        }
    }

    /// Integrate-and-fire population (`V_th = 1.0`, no leak).
    pub fn with_defaults(neurons: usize) -> Self {
        Self::new(neurons, Fixed::ONE, Fixed::ONE)
    }

    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    pub fn threshold(&self) -> Fixed {
        self.threshold
    }

    pub fn leak(&self) -> Fixed {
        self.leak
    }

    pub fn potentials(&self) -> &[Fixed] {
        &self.potentials
    }

    pub fn potential(&self, neuron: usize) -> Result<Fixed, SpikeError> {
        self.potentials
            .get(neuron)
            .copied()
            .ok_or(SpikeError::NeuronOutOfRange { index: neuron, len: self.len() })
    }

    pub fn set_potential(&mut self, neuron: usize, value: Fixed) -> Result<(), SpikeError> {
        let len = self.len();
        let slot = self
            .potentials
            .get_mut(neuron)
            .ok_or(SpikeError::NeuronOutOfRange { index: neuron, len })?;
        *slot = value;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.potentials.fill(Fixed::ZERO);
    }

    /// Leaked potential of `neuron` before any new input, as a raw value.
    pub(crate) fn leaked(&self, neuron: usize) -> Result<i64, SpikeError> {
        Ok(self.leak.mul_round(self.potential(neuron)?))
    }

    /// Commits a fully accumulated raw potential: checks the accumulator
    /// width, applies the threshold and the hard reset.
    pub(crate) fn commit(&mut self, neuron: usize, raw: i64) -> Result<bool, SpikeError> {
        check_width(neuron, raw)?;
        let spike = raw >= i64::from(self.threshold.raw());
        self.potentials[neuron] = if spike { Fixed::ZERO } else { Fixed::from_raw(raw as i32) };
        Ok(spike)
    }

    /// One LIF update of a single neuron with an integer (raw fixed-point)
    /// input current. Returns whether the neuron fired.
    pub fn lif_step(&mut self, neuron: usize, input: i64) -> Result<bool, SpikeError> {
        let leaked = self.leaked(neuron)?;
        let raw = leaked
            .checked_add(input)
            .ok_or(SpikeError::Overflow { neuron, value: i64::MAX })?;
        self.commit(neuron, raw)
    }
}

pub(crate) fn check_width(neuron: usize, raw: i64) -> Result<(), SpikeError> {
    if raw.abs() >= RAW_LIMIT {
        Err(SpikeError::Overflow { neuron, value: raw })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fx(v: f64) -> Fixed {
        Fixed::from_f64(v).unwrap()
    }

    fn state(v: f64, th: f64, leak: f64) -> MembraneState {
        let mut s = MembraneState::new(1, fx(th), fx(leak));
        s.set_potential(0, fx(v)).unwrap();
        s
    }

    #[test]
    fn zero_input_does_not_fire() {
        let mut s = state(0.0, 1.0, 1.0);
        assert!(!s.lif_step(0, 0).unwrap());
        assert_eq!(s.potential(0).unwrap(), Fixed::ZERO);
    }

    #[test]
    fn threshold_crossing_fires_and_resets() {
        let mut s = state(0.6, 1.0, 1.0);
        assert!(s.lif_step(0, i64::from(fx(0.5).raw())).unwrap());
        assert_eq!(s.potential(0).unwrap(), Fixed::ZERO);
    }

    #[test]
    fn leak_applies_before_input() {
        let mut s = state(0.5, 1.0, 0.5);
        assert!(!s.lif_step(0, i64::from(fx(0.3).raw())).unwrap());
        let v = s.potential(0).unwrap().to_f64();
        assert!((v - 0.55).abs() <= 1.0 / 256.0, "{v}");
        assert_eq!(s.potential(0).unwrap().raw(), 64 + 77);
    }

    #[test]
    fn exactly_threshold_fires() {
        let mut s = state(0.0, 1.0, 1.0);
        assert!(s.lif_step(0, 256).unwrap());
    }

    #[test]
    fn overflow_is_reported() {
        let mut s = MembraneState::with_defaults(1);
        let err = s.lif_step(0, -RAW_LIMIT).unwrap_err();
        assert!(matches!(err, SpikeError::Overflow { neuron: 0, .. }));
        assert_eq!(s.potential(0).unwrap(), Fixed::ZERO);
    }

    #[test]
    fn out_of_range_neuron() {
        let mut s = MembraneState::with_defaults(2);
        assert!(matches!(s.lif_step(2, 0), Err(SpikeError::NeuronOutOfRange { index: 2, len: 2 })));
    }

    proptest! {
        #[test]
        fn reset_after_spike(v in -2000i32..2000, input in -5000i64..5000, leak in 0i32..=256) {
            let mut s = MembraneState::new(1, Fixed::ONE, Fixed::from_raw(leak));
            s.set_potential(0, Fixed::from_raw(v)).unwrap();
            if s.lif_step(0, input).unwrap() {
                prop_assert_eq!(s.potential(0).unwrap(), Fixed::ZERO);
            }
        }

        #[test]
        fn more_input_never_unfires(v in -2000i32..2000, a in -5000i64..5000, extra in 0i64..5000) {
            let mut lo = MembraneState::with_defaults(1);
            lo.set_potential(0, Fixed::from_raw(v)).unwrap();
            let mut hi = lo.clone();
            let fired_lo = lo.lif_step(0, a).unwrap();
            let fired_hi = hi.lif_step(0, a + extra).unwrap();
            prop_assert!(!fired_lo || fired_hi);
        }
    }
}
