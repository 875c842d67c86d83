//! Relational influence propagation: each vertex's label likelihood becomes
//! the edge-weighted mean of the likelihoods its in-neighbours sent.

use std::fmt;

use smallvec::SmallVec;

use super::{ProgramError, VertexProgram, VertexState};
use crate::codec::{CodecError, Wire};
use crate::graph::{Edge, Graph, VertexId};
use crate::scalar::Scalar;

/// Per-class likelihoods, stored inline for up to four classes.
pub type Likelihood<S> = SmallVec<[S; 4]>;

#[derive(Clone, Debug, PartialEq)]
pub struct RipState<S> {
    pub likelihood: Likelihood<S>,
    pub is_seed: bool,
}

impl<S: Scalar> RipState<S> {
    /// Most likely class; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.likelihood.iter().enumerate() {
            if *p > self.likelihood[best] {
                best = i;
            }
        }
        best
    }
}

/// Renders as `p_0,p_1,...<TAB>argmax` with round-trippable floats.
impl<S: Scalar> fmt::Display for RipState<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.likelihood.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "\t{}", self.argmax())
    }
}

impl<S: Scalar> Wire for RipState<S> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.likelihood.encode(out);
        self.is_seed.encode(out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        Ok(Self {
            likelihood: Likelihood::decode(input)?,
            is_seed: bool::decode(input)?,
        })
    }
    fn encoded_len(&self) -> usize {
        self.likelihood.encoded_len() + 1
    }
}

/// A neighbour's likelihood together with the linking edge weight.
#[derive(Clone, Debug, PartialEq)]
pub struct RipMessage<S> {
    pub label: Likelihood<S>,
    pub weight: S,
}

impl<S: Scalar> Wire for RipMessage<S> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.label.encode(out);
        self.weight.encode(out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        let label = Likelihood::decode(input)?;
        let weight = S::decode(input)?;
        if !(weight > S::zero()) {
            return Err(CodecError::Invalid("message weight must be positive"));
        }
        Ok(Self { label, weight })
    }
    fn encoded_len(&self) -> usize {
        self.label.encoded_len() + S::WIDTH
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Rip<S = f64> {
    num_classes: usize,
    clamp_seeds: bool,
    _weight: std::marker::PhantomData<fn() -> S>,
}

impl<S: Scalar> Rip<S> {
    /// Seeds are clamped by default: labelled vertices keep their label.
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            clamp_seeds: true,
            _weight: std::marker::PhantomData,
        }
    }

    pub fn with_clamp_seeds(mut self, clamp: bool) -> Self {
        self.clamp_seeds = clamp;
        self
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn clamp_seeds(&self) -> bool {
        self.clamp_seeds
    }

    fn uniform(&self) -> Likelihood<S> {
        Likelihood::from_elem(S::one() / S::from_usize_lossy(self.num_classes), self.num_classes)
    }
}

impl<S: Scalar> VertexProgram for Rip<S> {
    type Weight = S;
    type State = RipState<S>;
    type Message = RipMessage<S>;

    fn name(&self) -> &'static str {
        "rip"
    }

    fn validate(&self, graph: &Graph<S>) -> Result<(), ProgramError> {
        if self.num_classes < 2 {
            return Err(ProgramError::TooFewClasses(self.num_classes));
        }
        for (&vertex, label) in graph.seed_labels() {
            if label.len() != self.num_classes {
                return Err(ProgramError::SeedWidth {
                    vertex,
                    found: label.len(),
                    expected: self.num_classes,
                });
            }
        }
        Ok(())
    }

    fn init(&self, vertex: VertexId, graph: &Graph<S>) -> VertexState<RipState<S>> {
        let value = match graph.seed_labels().get(&vertex) {
            Some(label) => RipState {
                likelihood: Likelihood::from_slice(label),
                is_seed: true,
            },
            None => RipState {
                likelihood: self.uniform(),
                is_seed: false,
            },
        };
        VertexState::new(value, true)
    }

    fn apply(&self, state: &RipState<S>, messages: &[RipMessage<S>]) -> (RipState<S>, bool) {
        if messages.is_empty() || (self.clamp_seeds && state.is_seed) {
            return (state.clone(), true);
        }
        let mut sum_labels = Likelihood::from_elem(S::zero(), state.likelihood.len());
        let mut sum_weights = S::zero();
        for m in messages {
            for (acc, p) in sum_labels.iter_mut().zip(&m.label) {
                *acc = *acc + *p * m.weight;
            }
            sum_weights = sum_weights + m.weight;
        }
        for acc in &mut sum_labels {
            *acc = *acc / sum_weights;
        }
        (
            RipState {
                likelihood: sum_labels,
                is_seed: state.is_seed,
            },
            true,
        )
    }

    fn emit(
        &self,
        _vertex: VertexId,
        state: &RipState<S>,
        edges: &[Edge<S>],
        out: &mut Vec<(VertexId, RipMessage<S>)>,
    ) {
        // Zero-weight edges carry no influence; skipping them keeps every weight positive.
        out.extend(edges.iter().filter(|e| e.weight > S::zero()).map(|e| {
            (
                e.target,
                RipMessage {
                    label: state.likelihood.clone(),
                    weight: e.weight,
                },
            )
        }));
    }

    fn always_active(&self) -> bool {
        true
    }

    fn has_combiner(&self) -> bool {
        true
    }

    /// Running weighted mean with accumulated weight.
    fn combine(&self, a: &RipMessage<S>, b: &RipMessage<S>) -> RipMessage<S> {
        let weight = a.weight + b.weight;
        let label = a
            .label
            .iter()
            .zip(&b.label)
            .map(|(&x, &y)| (x * a.weight + y * b.weight) / weight)
            .collect();
        RipMessage { label, weight }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SeedLabels;
    use crate::program::combine_all;
    use rand::{Rng, SeedableRng};

    fn msg(label: &[f64], weight: f64) -> RipMessage<f64> {
        RipMessage {
            label: Likelihood::from_slice(label),
            weight,
        }
    }

    fn unseeded(likelihood: &[f64]) -> RipState<f64> {
        RipState {
            likelihood: Likelihood::from_slice(likelihood),
            is_seed: false,
        }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn init_seeded_and_uniform() {
        let g: Graph<f64> = [(5, 6, 1.0)].into_iter().collect();
        let (g, _) = g
            .with_seed_labels(SeedLabels::from([(5, vec![1.0, 0.0])]))
            .unwrap();
        let p = Rip::<f64>::new(2);
        let s5 = p.init(5, &g);
        assert_eq!(s5.value.likelihood[..], [1.0, 0.0]);
        assert!(s5.value.is_seed && s5.active);
        let s6 = p.init(6, &g);
        assert_eq!(s6.value.likelihood[..], [0.5, 0.5]);
        assert!(!s6.value.is_seed && s6.active);

        let p15 = Rip::<f64>::new(15);
        let u = p15.init(6, &g).value.likelihood;
        assert_eq!(u.len(), 15);
        assert!(u.iter().all(|&x| x == 1.0 / 15.0));
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let g: Graph<f64> = [(5, 6, 1.0)].into_iter().collect();
        assert_eq!(
            Rip::<f64>::new(1).validate(&g),
            Err(ProgramError::TooFewClasses(1))
        );
        let (g, _) = g
            .with_seed_labels(SeedLabels::from([(5, vec![1.0, 0.0])]))
            .unwrap();
        assert!(matches!(
            Rip::<f64>::new(3).validate(&g),
            Err(ProgramError::SeedWidth { vertex: 5, .. })
        ));
    }

    #[test]
    fn weighted_mean_examples() {
        let p = Rip::<f64>::new(2);
        let start = unseeded(&[0.5, 0.5]);
        let (s, active) = p.apply(&start, &[msg(&[1.0, 0.0], 2.0), msg(&[0.0, 1.0], 1.0)]);
        assert!(active);
        assert!(close(&s.likelihood, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));

        let (s, _) = p.apply(&start, &[msg(&[0.4, 0.6], 5.0)]);
        assert!(close(&s.likelihood, &[0.4, 0.6], 1e-15));

        let (s, active) = p.apply(&start, &[]);
        assert_eq!(s, start);
        assert!(active);
    }

    #[test]
    fn seed_clamping_is_a_flag() {
        let seed = RipState {
            likelihood: smallvec::smallvec![1.0, 0.0],
            is_seed: true,
        };
        let msgs = [msg(&[0.0, 1.0], 1.0)];
        let clamped = Rip::<f64>::new(2);
        assert_eq!(clamped.apply(&seed, &msgs).0, seed);
        let free = Rip::<f64>::new(2).with_clamp_seeds(false);
        let (s, _) = free.apply(&seed, &msgs);
        assert_eq!(s.likelihood[..], [0.0, 1.0]);
        assert!(s.is_seed);
    }

    #[test]
    fn emit_one_message_per_edge() {
        let p = Rip::<f64>::new(2);
        let state = unseeded(&[0.7, 0.3]);
        let mut out = Vec::new();
        p.emit(1, &state, &[Edge { target: 2, weight: 1.5 }], &mut out);
        assert_eq!(out, vec![(2, msg(&[0.7, 0.3], 1.5))]);

        out.clear();
        p.emit(1, &state, &[], &mut out);
        assert!(out.is_empty());

        let edges: Vec<Edge<f64>> = (0..3).map(|t| Edge { target: t, weight: 0.5 }).collect();
        p.emit(1, &state, &edges, &mut out);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn combine_examples() {
        let p = Rip::<f64>::new(2);
        let c = p.combine(&msg(&[1.0, 0.0], 2.0), &msg(&[0.0, 1.0], 1.0));
        assert!(close(&c.label, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        assert_eq!(c.weight, 3.0);
        let x = msg(&[0.3, 0.7], 0.8);
        assert!(close(&p.combine(&x, &x).label, &x.label, 1e-15));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn every_fold_order_matches_raw_apply() {
        let p = Rip::<f64>::new(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let messages: Vec<RipMessage<f64>> = (0..5)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                msg(&raw.iter().map(|x| x / sum).collect::<Vec<_>>(), rng.random_range(0.05..2.0))
            })
            .collect();
        let start = unseeded(&[1.0 / 3.0; 3]);
        let (direct, _) = p.apply(&start, &messages);
        let orders = permutations(5);
        assert_eq!(orders.len(), 120);
        for order in orders {
            let permuted: Vec<_> = order.iter().map(|&i| messages[i].clone()).collect();
            let folded = combine_all(&p, &permuted).unwrap();
            let (via_combiner, _) = p.apply(&start, &[folded]);
            assert!(close(&via_combiner.likelihood, &direct.likelihood, 1e-12));
            let (permuted_apply, _) = p.apply(&start, &permuted);
            assert!(close(&permuted_apply.likelihood, &direct.likelihood, 1e-12));
        }
    }

    #[test]
    fn display_reports_vector_and_argmax() {
        let s = unseeded(&[0.25, 0.75]);
        assert_eq!(s.to_string(), "0.25,0.75\t1");
        assert_eq!(unseeded(&[0.5, 0.5]).argmax(), 0);
    }

    #[test]
    fn f32_labels_work() {
        let p = Rip::<f32>::new(2);
        let start = RipState {
            likelihood: smallvec::smallvec![0.5f32, 0.5],
            is_seed: false,
        };
        let m = RipMessage {
            label: smallvec::smallvec![1.0f32, 0.0],
            weight: 2.0f32,
        };
        let (s, _) = p.apply(&start, &[m.clone()]);
        assert_eq!(s.likelihood[..], [1.0, 0.0]);
        assert_eq!(RipMessage::<f32>::from_bytes(&m.to_bytes()).unwrap(), m);
        assert_eq!(m.encoded_len(), 1 + 2 * 4 + 4);
    }
}
