use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::{Scalar, Tensor};

type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &mut GradSink<T>)>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    requires_grad: bool,
    is_leaf: bool,
    backward: Option<BackwardFn<T>>,
}

/// Tape of eagerly evaluated operations.
pub struct Graph<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> fmt::Debug for Graph<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({} nodes)", self.nodes.borrow().len())
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    /// A leaf whose gradient is reported by [`Graph::backward`].
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, true)
    }

    fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value: Rc::new(value), requires_grad, is_leaf: true, backward: None });
        Var { graph: self, id: nodes.len() - 1 }
    }

    /// Records an operation result. `backward` is dropped when no parent
    /// requires a gradient.
    pub(crate) fn record<F>(&self, value: Tensor<T>, parents: &[usize], backward: F) -> Var<'_, T>
    where
        F: Fn(&Tensor<T>, &mut GradSink<T>) + 'static,
    {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = parents.iter().any(|&p| nodes[p].requires_grad);
        let backward: Option<BackwardFn<T>> =
            if requires_grad { Some(Box::new(backward)) } else { None };
        nodes.push(Node { value: Rc::new(value), requires_grad, is_leaf: false, backward });
        Var { graph: self, id: nodes.len() - 1 }
    }

    pub(crate) fn value_of(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Back-propagates from a single-element `loss`.
    pub fn backward(&self, loss: Var<'_, T>) -> Gradients<T> {
        assert!(std::ptr::eq(loss.graph, self), "loss belongs to another graph");
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.id].value.numel(), 1, "backward needs a scalar loss");
        let mut sink = GradSink {
            grads: (0..nodes.len()).map(|_| None).collect(),
            requires: nodes.iter().map(|n| n.requires_grad).collect(),
        };
        if nodes[loss.id].requires_grad {
            sink.grads[loss.id] = Some(Tensor::ones(nodes[loss.id].value.shape()));
        }
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let Some(backward) = node.backward.as_ref() else { continue };
            let Some(grad) = sink.grads[id].take() else { continue };
            backward(&grad, &mut sink);
        }
        let leaves = nodes.iter().map(|n| n.is_leaf).collect::<Vec<_>>();
        for (g, leaf) in sink.grads.iter_mut().zip(leaves) {
            if !leaf {
                *g = None;
            }
        }
        Gradients { grads: sink.grads }
    }
}

/// Gradient accumulator handed to backward closures.
pub struct GradSink<T> {
    grads: Vec<Option<Tensor<T>>>,
    requires: Vec<bool>,
}

impl<T: Scalar> GradSink<T> {
    pub fn wants(&self, id: usize) -> bool {
        self.requires[id]
    }

    pub fn accumulate(&mut self, id: usize, grad: Tensor<T>) {
        if !self.requires[id] {
            return;
        }
        match &mut self.grads[id] {
            Some(g) => g.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of its shape when nothing flowed back.
    pub fn get_or_zeros(&self, var: Var<'_, T>) -> Tensor<T> {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(var.value().shape()))
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.grads.get_mut(var.id).and_then(Option::take)
    }
}

/// Handle to a node of a [`Graph`].
pub struct Var<'g, T> {
    pub(crate) graph: &'g Graph<T>,
    pub(crate) id: usize,
}

impl<T> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for Var<'_, T> {}

impl<T: Scalar> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value().shape())
    }
}

impl<'g, T: Scalar> Var<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<T>> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad(self.id)
    }

    pub(crate) fn same_graph(&self, other: &Var<'g, T>) {
        assert!(std::ptr::eq(self.graph, other.graph), "vars from different graphs");
    }
}
