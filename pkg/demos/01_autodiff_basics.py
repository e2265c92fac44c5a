"""A tour of the reverse-mode autodiff core.

Every computation runs inside a Tape context; the tape records each
primitive so a single backward pass can fill in gradients for the
trainable leaves.
"""

import numpy as np

from simxfer.autodiff import (
    Tape,
    Tensor,
    backward,
    cosine,
    forward_primitive,
    grad_check,
    matmul,
    softmax,
    subtract,
)

# --- forward primitives -----------------------------------------------------

with Tape() as tape:
    product = forward_primitive("elementwise_multiply", ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]))
    print("elementwise product:", product.values)

    uniform = softmax(Tensor([0.0, 0.0, 0.0, 0.0, 0.0]))
    print("softmax of equal logits:", uniform.values)

    similarity = cosine(Tensor([1.0, 1.0]), Tensor([1.0, 0.0]))
    print("cosine([1,1],[1,0]) =", float(similarity.values), "(= 1/sqrt(2))")

# A zero vector cannot produce NaN; the result is 0 with a degeneracy flag.
with Tape():
    degenerate = cosine(Tensor([0.0, 0.0]), Tensor([0.0, 0.0]))
    print("cosine of zero vectors:", float(degenerate.values),
          "degenerate =", degenerate.degenerate)

# --- gradients ----------------------------------------------------------------

x = Tensor([1.0, 2.0], trainable=True, name="x")
with Tape() as tape:
    loss = matmul(x, x)  # sum of squares
backward(tape, loss)
print("\nd(sum x^2)/dx at [1, 2]:", x.grad, "(expected [2, 4])")

# Gradients accumulate until reset, matching optimizer contracts.
backward(tape, loss)
print("after a second backward:", x.grad)
x.zero_grad()

# cosine of a vector with itself is constant 1, so its gradient vanishes
u = Tensor([0.3, -1.2, 2.0], trainable=True)
with Tape() as tape:
    loss = cosine(u, u)
backward(tape, loss)
print("d cosine(u, u)/du:", u.grad)

# --- checking against finite differences ----------------------------------------

w = Tensor(np.random.default_rng(0).normal(size=(3, 2)), trainable=True)
v = Tensor([0.5, -0.25])


def quadratic():
    out = matmul(w, v)
    return matmul(out, out)


error = grad_check(quadratic, [w], step=1e-5)
print(f"\ngrad_check on a quadratic: max relative error {error:.2e}")

# --- replay -------------------------------------------------------------------

with Tape() as tape:
    a = Tensor([1.0, 4.0])
    b = Tensor([3.0, 1.0])
    out = softmax(subtract(a, b))
before = out.values.copy()
tape.replay()
print("replay reproduces outputs bitwise:", np.array_equal(before, out.values))
