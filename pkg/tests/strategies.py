"""Hypothesis strategies producing random kernels in the accepted subset."""

from hypothesis import strategies as st

OPS = ("+", "-", "*")


@st.composite
def kernel_sources(draw, max_inputs=3, max_lets=12, max_outputs=2, small_consts=True):
    """Straight-line kernels whose let-bindings form a random expression DAG."""
    n_in = draw(st.integers(1, max_inputs))
    n_out = draw(st.integers(1, max_outputs))
    ins = [f"A{k}" for k in range(n_in)]
    outs = [f"B{k}" for k in range(n_out)]
    const = st.integers(-40, 40) if small_consts else st.integers(-(2 ** 31), 2 ** 31 - 1)
    lines = []
    names = [f"{p}[i]" for p in ins]

    def operand():
        if draw(st.integers(0, 5)) == 0:
            c = draw(const)
            return f"({c})" if c < 0 else str(c)
        return draw(st.sampled_from(names))

    for k in range(draw(st.integers(1, max_lets))):
        op = draw(st.sampled_from(OPS))
        lines.append(f"    int t{k} = {operand()} {op} {operand()};")
        names.append(f"t{k}")
    for o in outs:
        # anchor every output on a variable so no output is a constant
        var = draw(st.sampled_from(names))
        op = draw(st.sampled_from(OPS))
        lines.append(f"    {o}[i] = {var} {op} {operand()};")
    params = ", ".join(f"__global int *{p}" for p in ins + outs)
    return f"__kernel void rnd({params})\n{{\n    int i = get_global_id(0);\n" + "\n".join(lines) + "\n}\n"


def int_vectors(n_inputs, width=32):
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    return st.lists(st.integers(lo, hi), min_size=n_inputs, max_size=n_inputs)
