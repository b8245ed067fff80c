"""Per-op gradient-check models and the two-layer MLP used by the
finite-difference suites.

Each case is (name, fn, sampler): `fn` has a single rank-0 result, and
`sampler(rng)` draws a random point that stays away from subgradient kinks
(Relu preactivations and Maximum ties are resampled, Divide denominators and
Log arguments are bounded away from zero).
"""

from __future__ import annotations

import random

from graphforge import Function, build_softmax
from graphforge.ir import ElementType, OpKind, element_count
from graphforge.tensor import tensor_from_flat

F64 = ElementType.F64


def _values(rng, count, lo=-2.0, hi=2.0):
    return [rng.uniform(lo, hi) for _ in range(count)]


def _tensor(rng, shape, lo=-2.0, hi=2.0):
    return tensor_from_flat(F64, shape, _values(rng, element_count(shape), lo, hi))


def _scalarize(fn: Function, nid: int, weight_seed: int) -> None:
    """Reduce `nid` to a rank-0 result through a fixed random weighting."""
    shape = fn.nodes[nid].output.shape
    rng = random.Random(weight_seed)
    if shape != ():
        w = fn.add_constant(F64, shape, _values(rng, element_count(shape), 0.1, 1.0))
        nid = fn.add_node(OpKind.MULTIPLY, [nid, w])
        nid = fn.add_node(OpKind.SUM, [nid], {"reduction_axes": tuple(range(len(shape)))})
    fn.set_results([nid])


def _binary_case(kind: OpKind, shape=(2, 3)):
    fn = Function(kind.wire_name.lower())
    x = fn.add_parameter(F64, shape)
    y = fn.add_parameter(F64, shape)
    _scalarize(fn, fn.add_node(kind, [x, y]), weight_seed=hash(kind.wire_name) % 10000)
    return fn


def _unary_case(kind: OpKind, shape=(2, 3)):
    fn = Function(kind.wire_name.lower())
    x = fn.add_parameter(F64, shape)
    _scalarize(fn, fn.add_node(kind, [x]), weight_seed=hash(kind.wire_name) % 10000)
    return fn


def _plain_sampler(shapes, lo=-2.0, hi=2.0):
    return lambda rng: [_tensor(rng, s, lo, hi) for s in shapes]


def _relu_sampler(shape):
    def sample(rng):
        vals = [v for v in _values(rng, element_count(shape)) if abs(v) > 1e-2]
        while len(vals) < element_count(shape):
            v = rng.uniform(-2.0, 2.0)
            if abs(v) > 1e-2:
                vals.append(v)
        return [tensor_from_flat(F64, shape, vals)]

    return sample


def _maximum_sampler(shape):
    def sample(rng):
        n = element_count(shape)
        xs, ys = _values(rng, n), _values(rng, n)
        for i in range(n):
            while abs(xs[i] - ys[i]) < 1e-2:
                ys[i] = rng.uniform(-2.0, 2.0)
        return [tensor_from_flat(F64, shape, xs), tensor_from_flat(F64, shape, ys)]

    return sample


def _divide_sampler(shape):
    def sample(rng):
        n = element_count(shape)
        xs = _values(rng, n)
        ys = []
        while len(ys) < n:
            v = rng.uniform(-2.0, 2.0)
            if abs(v) > 0.3:
                ys.append(v)
        return [tensor_from_flat(F64, shape, xs), tensor_from_flat(F64, shape, ys)]

    return sample


def op_gradient_cases():
    """One (name, fn, sampler) triple per differentiable op."""
    shape = (2, 3)
    cases = []
    for kind in (OpKind.ADD, OpKind.SUBTRACT, OpKind.MULTIPLY):
        cases.append((kind.wire_name, _binary_case(kind), _plain_sampler([shape, shape])))
    cases.append(("Divide", _binary_case(OpKind.DIVIDE), _divide_sampler(shape)))
    cases.append(("Maximum", _binary_case(OpKind.MAXIMUM), _maximum_sampler(shape)))
    for kind in (OpKind.NEGATE, OpKind.EXP, OpKind.TANH, OpKind.SIGMOID):
        cases.append((kind.wire_name, _unary_case(kind), _plain_sampler([shape])))
    cases.append(("Log", _unary_case(OpKind.LOG), _plain_sampler([shape], 0.3, 3.0)))
    cases.append(("Relu", _unary_case(OpKind.RELU), _relu_sampler(shape)))

    fn = Function("dot")
    a = fn.add_parameter(F64, (2, 3))
    b = fn.add_parameter(F64, (3, 2))
    _scalarize(fn, fn.add_node(OpKind.DOT, [a, b]), weight_seed=11)
    cases.append(("Dot", fn, _plain_sampler([(2, 3), (3, 2)])))

    fn = Function("broadcast")
    x = fn.add_parameter(F64, (3,))
    bc = fn.add_node(
        OpKind.BROADCAST, [x], {"output_shape": (2, 3), "broadcast_axes": (0,)}
    )
    _scalarize(fn, bc, weight_seed=12)
    cases.append(("Broadcast", fn, _plain_sampler([(3,)])))

    fn = Function("sum")
    x = fn.add_parameter(F64, (2, 3))
    sm = fn.add_node(OpKind.SUM, [x], {"reduction_axes": (0,)})
    _scalarize(fn, sm, weight_seed=13)
    cases.append(("Sum", fn, _plain_sampler([(2, 3)])))

    fn = Function("reshape")
    x = fn.add_parameter(F64, (2, 3))
    rs = fn.add_node(
        OpKind.RESHAPE, [x], {"input_order": (1, 0), "output_shape": (3, 2)}
    )
    _scalarize(fn, rs, weight_seed=14)
    cases.append(("Reshape", fn, _plain_sampler([(2, 3)])))

    fn = Function("reshape_flatten")
    x = fn.add_parameter(F64, (2, 2, 3))
    rs = fn.add_node(
        OpKind.RESHAPE, [x], {"input_order": (2, 0, 1), "output_shape": (6, 2)}
    )
    _scalarize(fn, rs, weight_seed=15)
    cases.append(("Reshape/flatten", fn, _plain_sampler([(2, 2, 3)])))

    fn = Function("conv2d")
    data = fn.add_parameter(F64, (1, 2, 4, 4))
    flt = fn.add_parameter(F64, (2, 2, 3, 3))
    conv = fn.add_node(
        OpKind.CONV2D, [data, flt], {"strides": (1, 1), "padding": (1, 0, 0, 1)}
    )
    _scalarize(fn, conv, weight_seed=16)
    cases.append(("Conv2D", fn, _plain_sampler([(1, 2, 4, 4), (2, 2, 3, 3)])))

    fn = Function("softmax")
    x = fn.add_parameter(F64, (2, 4))
    _scalarize(fn, build_softmax(fn, x, 1), weight_seed=17)
    cases.append(("softmax-composite", fn, _plain_sampler([(2, 4)])))

    return cases


# ---------------------------------------------------------------------------
# Two-layer MLP: Dot -> Relu -> Dot -> softmax -> dot-product loss


MLP_SHAPES = {
    "x": (2, 3),
    "w1": (3, 4),
    "w2": (4, 3),
    "targets": (2, 3),
}


def build_mlp() -> Function:
    fn = Function("mlp")
    x = fn.add_parameter(F64, MLP_SHAPES["x"])
    w1 = fn.add_parameter(F64, MLP_SHAPES["w1"])
    w2 = fn.add_parameter(F64, MLP_SHAPES["w2"])
    t = fn.add_parameter(F64, MLP_SHAPES["targets"])
    hidden = fn.add_node(OpKind.RELU, [fn.add_node(OpKind.DOT, [x, w1])])
    logits = fn.add_node(OpKind.DOT, [hidden, w2])
    probs = build_softmax(fn, logits, 1)
    weighted = fn.add_node(OpKind.MULTIPLY, [probs, t])
    loss = fn.add_node(OpKind.SUM, [weighted], {"reduction_axes": (0, 1)})
    fn.set_results([loss])
    return fn


def sample_mlp_point(rng: random.Random, min_preactivation: float = 1e-3):
    """Random MLP inputs resampled so no Relu preactivation sits at a kink."""
    while True:
        x = _tensor(rng, MLP_SHAPES["x"])
        w1 = _tensor(rng, MLP_SHAPES["w1"])
        b, i = MLP_SHAPES["x"]
        h = MLP_SHAPES["w1"][1]
        xf, wf = x.to_flat(), w1.to_flat()
        pre = [
            sum(xf[r * i + k] * wf[k * h + c] for k in range(i))
            for r in range(b)
            for c in range(h)
        ]
        if all(abs(v) > min_preactivation for v in pre):
            break
    w2 = _tensor(rng, MLP_SHAPES["w2"])
    t = _tensor(rng, MLP_SHAPES["targets"], 0.1, 1.0)
    return [x, w1, w2, t]
