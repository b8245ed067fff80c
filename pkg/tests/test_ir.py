"""Core IR: inference rules, construction, validation, ordering, softmax."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from graphforge import (
    ElementType,
    Function,
    OpKind,
    TensorDescriptor,
    build_softmax,
    call,
    compile_function,
    infer_output,
    topological_order,
    validate_function,
)
from graphforge.errors import (
    ArityMismatch,
    CycleDetected,
    ElementTypeMismatch,
    InvalidAttribute,
    ShapeMismatch,
)
from graphforge.ir import Node, element_count, normalize_attrs
from graphforge.tensor import tensor_from_flat

F32, F64, I64, BOOL = ElementType.F32, ElementType.F64, ElementType.I64, ElementType.BOOL


def desc(et, shape):
    return TensorDescriptor(et, tuple(shape))


def infer(kind, descs, attrs=None):
    return infer_output(kind, normalize_attrs(kind, attrs), descs)


class TestElementType:
    def test_byte_sizes(self):
        assert F32.byte_size == 4
        assert F64.byte_size == 8
        assert I64.byte_size == 8
        assert BOOL.byte_size == 1

    def test_element_count(self):
        assert element_count(()) == 1
        assert element_count((2, 3)) == 6
        assert element_count((2, 0, 3)) == 0

    def test_descriptor_byte_size(self):
        assert desc(F64, (2, 3)).byte_size == 48
        assert desc(BOOL, (5,)).byte_size == 5
        assert desc(F32, ()).byte_size == 4


class TestInference:
    def test_dot(self):
        assert infer(OpKind.DOT, [desc(F64, (2, 3)), desc(F64, (3, 4))]) == desc(F64, (2, 4))

    def test_dot_inner_mismatch(self):
        with pytest.raises(ShapeMismatch):
            infer(OpKind.DOT, [desc(F64, (2, 3)), desc(F64, (4, 4))])

    def test_dot_rank(self):
        with pytest.raises(ShapeMismatch):
            infer(OpKind.DOT, [desc(F64, (3,)), desc(F64, (3, 4))])

    def test_broadcast_sum_duality_example(self):
        out = infer(
            OpKind.BROADCAST,
            [desc(F64, (3,))],
            {"output_shape": (2, 3), "broadcast_axes": (0,)},
        )
        assert out.shape == (2, 3)
        back = infer(OpKind.SUM, [out], {"reduction_axes": (0,)})
        assert back.shape == (3,)

    def test_broadcast_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            infer(
                OpKind.BROADCAST,
                [desc(F64, (3,))],
                {"output_shape": (2, 4), "broadcast_axes": (0,)},
            )

    def test_conv2d(self):
        out = infer(
            OpKind.CONV2D,
            [desc(F64, (1, 1, 4, 4)), desc(F64, (1, 1, 3, 3))],
            {"strides": (1, 1), "padding": (0, 0, 0, 0)},
        )
        assert out.shape == (1, 1, 2, 2)

    def test_conv2d_strided_floor(self):
        out = infer(
            OpKind.CONV2D,
            [desc(F64, (1, 1, 5, 5)), desc(F64, (2, 1, 2, 2))],
            {"strides": (2, 2), "padding": (0, 0, 0, 0)},
        )
        assert out.shape == (1, 2, 2, 2)

    def test_conv2d_filter_too_large(self):
        with pytest.raises(InvalidAttribute):
            infer(
                OpKind.CONV2D,
                [desc(F64, (1, 1, 2, 2)), desc(F64, (1, 1, 3, 3))],
                {"strides": (1, 1), "padding": (0, 0, 0, 0)},
            )

    def test_elementwise_requires_identical(self):
        with pytest.raises(ShapeMismatch):
            infer(OpKind.ADD, [desc(F64, (2,)), desc(F64, (3,))])
        with pytest.raises(ElementTypeMismatch):
            infer(OpKind.ADD, [desc(F64, (2,)), desc(F32, (2,))])

    def test_arity(self):
        with pytest.raises(ArityMismatch):
            infer(OpKind.ADD, [desc(F64, (2,))])

    def test_reshape(self):
        out = infer(
            OpKind.RESHAPE,
            [desc(F64, (2, 3))],
            {"input_order": (1, 0), "output_shape": (6,)},
        )
        assert out.shape == (6,)

    def test_reshape_bad_permutation(self):
        with pytest.raises(InvalidAttribute):
            infer(
                OpKind.RESHAPE,
                [desc(F64, (2, 3))],
                {"input_order": (0, 0), "output_shape": (6,)},
            )

    def test_reshape_count_mismatch(self):
        with pytest.raises(ShapeMismatch):
            infer(
                OpKind.RESHAPE,
                [desc(F64, (2, 3))],
                {"input_order": (0, 1), "output_shape": (5,)},
            )

    def test_sum_axis_out_of_range(self):
        with pytest.raises(InvalidAttribute):
            infer(OpKind.SUM, [desc(F64, (2, 3))], {"reduction_axes": (2,)})

    def test_convert_layout_descriptor_unchanged(self):
        d = desc(F32, (2, 3, 4))
        assert infer(OpKind.CONVERT_LAYOUT, [d], {"order": (2, 0, 1)}) == d

    def test_integer_op_matrix(self):
        d = desc(I64, (2,))
        assert infer(OpKind.ADD, [d, d]) == d
        for kind in (OpKind.DIVIDE, OpKind.MAXIMUM, OpKind.RELU, OpKind.EXP):
            with pytest.raises(ElementTypeMismatch):
                infer(kind, [d, d][: 2 if kind in (OpKind.DIVIDE, OpKind.MAXIMUM) else 1])
        with pytest.raises(ElementTypeMismatch):
            infer(OpKind.DOT, [desc(I64, (2, 2)), desc(I64, (2, 2))])

    def test_bool_op_matrix(self):
        d = desc(BOOL, (2,))
        out = infer(
            OpKind.BROADCAST, [d], {"output_shape": (3, 2), "broadcast_axes": (0,)}
        )
        assert out.element_type is BOOL
        with pytest.raises(ElementTypeMismatch):
            infer(OpKind.ADD, [d, d])

    def test_max_reduce_float_only(self):
        with pytest.raises(ElementTypeMismatch):
            infer(
                OpKind.SUM,
                [desc(I64, (3,))],
                {"reduction_axes": (0,), "reduction_kind": "max"},
            )

    def test_zero_sized_shapes_legal(self):
        d = desc(F64, (0, 3))
        assert infer(OpKind.ADD, [d, d]) == d
        out = infer(OpKind.DOT, [desc(F64, (2, 0)), desc(F64, (0, 3))])
        assert out.shape == (2, 3)


@given(
    shape=st.lists(st.integers(0, 4), max_size=3).map(tuple),
    insertions=st.lists(st.tuples(st.integers(0, 6), st.integers(0, 4)), min_size=1, max_size=3),
)
def test_broadcast_sum_duality_property(shape, insertions):
    """Whenever Broadcast(s -> t, A) validates, Sum(t, A) infers s."""
    out_shape = list(shape)
    axes = []
    for pos, extent in insertions:
        pos = min(pos, len(out_shape))
        out_shape.insert(pos, extent)
        axes = [a if a < pos else a + 1 for a in axes]
        axes.append(pos)
    axes = tuple(sorted(axes))
    out = infer(
        OpKind.BROADCAST,
        [desc(F64, shape)],
        {"output_shape": tuple(out_shape), "broadcast_axes": axes},
    )
    assert out.shape == tuple(out_shape)
    back = infer(OpKind.SUM, [out], {"reduction_axes": axes})
    assert back.shape == tuple(shape)


class TestFunctionConstruction:
    def test_add_node_ids_increase(self):
        fn = Function("f")
        x = fn.add_parameter(F64, (2,))
        y = fn.add_parameter(F64, (2,))
        z = fn.add_node(OpKind.ADD, [x, y])
        assert (x, y, z) == (1, 2, 3)

    def test_add_node_shape_error(self):
        fn = Function("f")
        x = fn.add_parameter(F64, (2,))
        y = fn.add_parameter(F64, (3,))
        with pytest.raises(ShapeMismatch):
            fn.add_node(OpKind.ADD, [x, y])

    def test_add_node_bad_axis(self):
        fn = Function("f")
        x = fn.add_parameter(F64, (2, 3))
        with pytest.raises(InvalidAttribute):
            fn.add_node(OpKind.SUM, [x], {"reduction_axes": (2,)})

    def test_identical_sequences_identical_functions(self):
        def build():
            fn = Function("f")
            x = fn.add_parameter(F64, (2,))
            c = fn.add_constant(F64, (2,), [1.0, 2.0])
            fn.set_results([fn.add_node(OpKind.MULTIPLY, [x, c])])
            return fn

        a, b = build(), build()
        assert a.nodes.keys() == b.nodes.keys()
        for nid in a.nodes:
            assert a.nodes[nid] == b.nodes[nid]

    def test_internal_ops_rejected(self):
        fn = Function("f")
        x = fn.add_parameter(F64, (1, 1, 3, 3))
        y = fn.add_parameter(F64, (1, 1, 2, 2))
        with pytest.raises(InvalidAttribute):
            fn.add_node(
                OpKind.CONV_BACKPROP_DATA,
                [y, x],
                {"data_shape": (1, 1, 3, 3), "padding": (0, 0, 0, 0)},
            )

    def test_constant_data_length_checked(self):
        fn = Function("f")
        with pytest.raises(InvalidAttribute):
            fn.add_constant(F64, (2, 2), [1.0, 2.0])


class TestValidation:
    def build_affine(self):
        fn = Function("affine")
        x = fn.add_parameter(F64, (2, 3))
        w = fn.add_parameter(F64, (3, 2))
        b = fn.add_parameter(F64, (2, 2))
        d = fn.add_node(OpKind.DOT, [x, w])
        fn.set_results([fn.add_node(OpKind.ADD, [d, b])])
        return fn

    def test_well_formed(self):
        assert validate_function(self.build_affine()) == []

    def test_cycle_detected(self):
        fn = Function("cyc")
        d = desc(F64, (2,))
        fn.nodes[1] = Node(1, OpKind.NEGATE, {}, ((2, 0),), (d,))
        fn.nodes[2] = Node(2, OpKind.NEGATE, {}, ((1, 0),), (d,))
        diags = validate_function(fn)
        assert any(x.code == "cycle" for x in diags)
        cycle_diag = next(x for x in diags if x.code == "cycle")
        assert "1" in cycle_diag.message and "2" in cycle_diag.message

    def test_descriptor_mismatch_detected(self):
        fn = self.build_affine()
        node = fn.nodes[4]
        fn.nodes[4] = Node(node.id, node.op, node.attrs, node.inputs, (desc(F64, (9, 9)),))
        diags = validate_function(fn)
        assert any(x.code == "descriptor-mismatch" and x.node_id == 4 for x in diags)

    def test_unknown_input_detected(self):
        fn = self.build_affine()
        node = fn.nodes[5]
        fn.nodes[5] = Node(node.id, node.op, node.attrs, ((4, 0), (99, 0)), node.outputs)
        diags = validate_function(fn)
        assert any(x.code == "unknown-input" and x.node_id == 5 for x in diags)

    def test_parameter_list_mismatch(self):
        fn = self.build_affine()
        fn.parameters = fn.parameters[:-1]
        diags = validate_function(fn)
        assert any(x.code == "param-list" for x in diags)

    def test_result_reference_checked(self):
        fn = self.build_affine()
        fn.results = [(99, 0)]
        diags = validate_function(fn)
        assert any(x.code == "result-ref" for x in diags)


class TestTopologicalOrder:
    def test_diamond_min_id_tie_break(self):
        fn = Function("d")
        a = fn.add_parameter(F64, (2,))
        b = fn.add_node(OpKind.NEGATE, [a])
        c = fn.add_node(OpKind.EXP, [a])
        d = fn.add_node(OpKind.ADD, [b, c])
        fn.set_results([d])
        assert topological_order(fn) == [a, b, c, d]

    def test_chain(self):
        fn = Function("c")
        n = fn.add_parameter(F64, (2,))
        ids = [n]
        for _ in range(5):
            n = fn.add_node(OpKind.NEGATE, [n])
            ids.append(n)
        fn.set_results([n])
        assert topological_order(fn) == ids

    def test_cycle_raises(self):
        fn = Function("cyc")
        d = desc(F64, (2,))
        fn.nodes[1] = Node(1, OpKind.NEGATE, {}, ((2, 0),), (d,))
        fn.nodes[2] = Node(2, OpKind.NEGATE, {}, ((1, 0),), (d,))
        with pytest.raises(CycleDetected):
            topological_order(fn)

    def test_random_dags_against_predecessor_oracle(self):
        # Oracle: in the returned order, every producer index precedes every
        # consumer index, and the order is a permutation of the node set.
        for seed in range(25):
            rng = random.Random(seed)
            fn = Function("r")
            pool = [fn.add_parameter(F64, (2,))]
            for _ in range(19):
                k = rng.randint(1, min(2, len(pool)))
                if k == 1:
                    pool.append(fn.add_node(OpKind.NEGATE, [rng.choice(pool)]))
                else:
                    a, b = rng.sample(pool, 2)
                    pool.append(fn.add_node(OpKind.ADD, [a, b]))
            fn.set_results([pool[-1]])
            order = topological_order(fn)
            assert sorted(order) == sorted(fn.nodes)
            position = {nid: i for i, nid in enumerate(order)}
            for nid, node in fn.nodes.items():
                for ref, _ in node.inputs:
                    assert position[ref] < position[nid]
            assert order == topological_order(fn)


class TestSoftmax:
    def run_softmax(self, values, shape=None, axis=0):
        shape = shape or (len(values),)
        fn = Function("sm")
        x = fn.add_parameter(F64, shape)
        fn.set_results([build_softmax(fn, x, axis)])
        exe = compile_function(fn)
        out = call(exe, [tensor_from_flat(F64, shape, values)])
        return out[0].to_flat()

    def test_symmetry(self):
        assert self.run_softmax([0.0, 0.0]) == [0.5, 0.5]

    def test_stabilized_no_overflow(self):
        out = self.run_softmax([1000.0, 1000.0])
        assert out == [0.5, 0.5]
        assert all(math.isfinite(v) for v in out)

    def test_matches_direct_evaluation(self):
        # Oracle: direct e^x / sum(e^x) at F64.
        values = [1.0, 2.0, 3.0]
        exps = [math.exp(v) for v in values]
        total = sum(exps)
        expected = [e / total for e in exps]
        out = self.run_softmax(values)
        for got, want in zip(out, expected):
            assert abs(got - want) < 1e-14

    def test_returns_divide_node(self):
        fn = Function("sm")
        x = fn.add_parameter(F64, (4,))
        out = build_softmax(fn, x, 0)
        assert fn.nodes[out].op is OpKind.DIVIDE
        assert validate_function(fn) == []

    def test_axis_out_of_range(self):
        fn = Function("sm")
        x = fn.add_parameter(F64, (4,))
        with pytest.raises(InvalidAttribute):
            build_softmax(fn, x, 1)
