"""Structure-exploiting constructions: backstepping and additive forwarding.

Strict-feedback cascades y' = h1(y) + h2(y) x, x' = f(y, x) + g(y, x) u
(scalar actuated coordinate by design) get a composite Lyapunov function
V(y, x) = V_y(y) + P22 (x - alpha_y(y))^2 whose input derivative vanishes
exactly on the manifold x = alpha_y(y). The partition helper extracts the
reduced matrix P_y as a Schur complement so that the composite's origin
Hessian reproduces the full quadratic prescription.

Forwarding is covered in its additive form only: appending a coordinate
whose drift vanishes at the equilibrium adds a weighted square to an inner
Lyapunov function.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import numdiff
from .clf import Clf, ControlAffineSystem, check_artstein_sampled, find_r0, \
    local_quadratic_clf
from .errors import CertificateError
from .linear_core import is_hurwitz, solve_lyapunov
from .sampling import quadratic_level_box
from .synthesis import blended_controller, sontag_controller
from .clf import blend_profile


class StrictFeedbackSystem:
    """Cascade with a scalar actuated coordinate driving a y-subsystem.

    h1, h2 map y to (n_y,) arrays; f, g map (y, x) to scalars with g
    nonvanishing (checked at the origin; sample elsewhere as needed). The
    origin blocks H1, H2, F1, F2, G are finite-difference defaults,
    validated within 1e-5 when supplied.
    """

    def __init__(self, n_y, h1, h2, f, g, blocks=None):
        self.n_y = int(n_y)
        self.n = self.n_y + 1
        self._h1, self._h2, self._f, self._g = h1, h2, f, g
        z = np.zeros(self.n_y)
        if np.linalg.norm(self.h1(z)) > 1e-12:
            raise ValueError("h1(0) must vanish")
        if abs(self.f(z, 0.0)) > 1e-12:
            raise ValueError("f(0, 0) must vanish")
        G0 = self.g(z, 0.0)
        if abs(G0) < 1e-12:
            raise ValueError("g must not vanish at the origin")
        H1_fd = numdiff.jacobian(self.h1, z)
        H2_fd = self.h2(z)
        F1_fd = numdiff.gradient(lambda y: self.f(y, 0.0), z)
        F2_fd = float(numdiff.gradient(lambda x: self.f(z, x[0]), np.zeros(1))[0])
        fd = (H1_fd, H2_fd, F1_fd, F2_fd, G0)
        if blocks is None:
            self.H1, self.H2, self.F1, self.F2, self.G = fd
        else:
            names = ("H1", "H2", "F1", "F2", "G")
            vals = []
            for name, given, ref in zip(names, blocks, fd):
                given = np.asarray(given, dtype=float)
                if np.linalg.norm(given - ref) > 1e-5 * (1.0 + np.linalg.norm(given)):
                    raise ValueError(f"supplied block {name} disagrees with finite differences")
                vals.append(given)
            self.H1, self.H2, self.F1, self.F2, self.G = \
                vals[0], vals[1], vals[2], float(vals[3]), float(vals[4])

    def h1(self, y):
        return np.asarray(self._h1(np.asarray(y, dtype=float)), dtype=float).reshape(self.n_y)

    def h2(self, y):
        return np.asarray(self._h2(np.asarray(y, dtype=float)), dtype=float).reshape(self.n_y)

    def f(self, y, x):
        return float(self._f(np.asarray(y, dtype=float), float(x)))

    def g(self, y, x):
        return float(self._g(np.asarray(y, dtype=float), float(x)))

    def assemble(self):
        """Origin linearization (A, B) of the cascade."""
        A = np.zeros((self.n, self.n))
        A[:self.n_y, :self.n_y] = self.H1
        A[:self.n_y, self.n_y] = self.H2
        A[self.n_y, :self.n_y] = self.F1
        A[self.n_y, self.n_y] = self.F2
        B = np.zeros((self.n, 1))
        B[self.n_y, 0] = self.G
        return A, B

    def to_control_affine(self):
        def a(chi):
            y, x = chi[:self.n_y], chi[self.n_y]
            return np.append(self.h1(y) + self.h2(y) * x, self.f(y, x))

        def b(chi):
            y, x = chi[:self.n_y], chi[self.n_y]
            col = np.zeros(self.n)
            col[self.n_y] = self.g(y, x)
            return col.reshape(self.n, 1)

        return ControlAffineSystem(self.n, 1, a, b, linearization=self.assemble())


class FeedforwardSystem:
    """Scalar coordinate fed by an actuated inner system: y' = h(x),
    x' = f(x) + g(x) u, with the appended coordinate listed first.
    """

    def __init__(self, n_x, p, h, f, g, blocks=None):
        self.n_x = int(n_x)
        self.p = int(p)
        self.n = self.n_x + 1
        self._h, self._f, self._g = h, f, g
        z = np.zeros(self.n_x)
        if abs(self.h(z)) > 1e-12:
            raise ValueError("h(0) must vanish")
        if np.linalg.norm(self.f(z)) > 1e-12:
            raise ValueError("f(0) must vanish")
        H_fd = numdiff.gradient(self.h, z)
        F_fd = numdiff.jacobian(self.f, z)
        G_fd = self.g(z)
        fd = (H_fd, F_fd, G_fd)
        if blocks is None:
            self.H, self.F, self.G = fd
        else:
            names = ("H", "F", "G")
            vals = []
            for name, given, ref in zip(names, blocks, fd):
                given = np.asarray(given, dtype=float)
                if np.linalg.norm(given - ref) > 1e-5 * (1.0 + np.linalg.norm(given)):
                    raise ValueError(f"supplied block {name} disagrees with finite differences")
                vals.append(given)
            self.H, self.F, self.G = vals

    def h(self, x):
        return float(self._h(np.asarray(x, dtype=float)))

    def f(self, x):
        return np.asarray(self._f(np.asarray(x, dtype=float)), dtype=float).reshape(self.n_x)

    def g(self, x):
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float).reshape(self.n_x, self.p)

    def to_control_affine(self):
        def a(chi):
            x = chi[1:]
            return np.append(self.h(x), self.f(x))

        def b(chi):
            x = chi[1:]
            return np.vstack([np.zeros((1, self.p)), self.g(x)])

        A = np.zeros((self.n, self.n))
        A[0, 1:] = self.H
        A[1:, 1:] = self.F
        B = np.vstack([np.zeros((1, self.p)), self.G])
        return ControlAffineSystem(self.n, self.p, a, b, linearization=(A, B))


@dataclass
class BacksteppingPartition:
    """Schur-complement split of a quadratic prescription for a cascade."""

    P_y: np.ndarray
    P12: np.ndarray
    P22: float
    T: np.ndarray
    local_inner_gain: np.ndarray

    def to_dict(self):
        return {
            "P_y": self.P_y.tolist(),
            "P12": self.P12.tolist(),
            "P22": self.P22,
            "local_inner_gain": self.local_inner_gain.tolist(),
        }


def backstepping_partition(P, blocks=None):
    """Split P into (P_y, P12, P22) with P_y the Schur complement.

    The annihilator T = [I; -P12'/P22] satisfies T'P = [P_y 0] and kills
    the input column exactly. When the y-subsystem blocks (H1, H2) are
    given, the reduced closed loop under the local inner gain is required
    to admit P_y as a Lyapunov matrix; a failure means P does not fit the
    cascade.
    """
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + P.T)
    np.linalg.cholesky(P)
    n = P.shape[0]
    n_y = n - 1
    P11 = P[:n_y, :n_y]
    P12 = P[:n_y, n_y]
    P22 = float(P[n_y, n_y])
    P_y = P11 - np.outer(P12, P12) / P22
    np.linalg.cholesky(P_y)
    gain = -P12 / P22
    T = np.vstack([np.eye(n_y), gain.reshape(1, n_y)])
    TP = T.T @ P
    if np.linalg.norm(TP[:, n_y]) > 1e-12 * (1.0 + np.linalg.norm(P)):
        raise CertificateError("annihilator failed to cancel the actuated column")
    if np.linalg.norm(TP[:, :n_y] - P_y) > 1e-12 * (1.0 + np.linalg.norm(P)):
        raise CertificateError("Schur complement identity failed")
    if blocks is not None:
        H1 = np.asarray(blocks[0], dtype=float).reshape(n_y, n_y)
        H2 = np.asarray(blocks[1], dtype=float).reshape(n_y)
        Hcl = H1 + np.outer(H2, gain)
        S = Hcl.T @ P_y + P_y @ Hcl
        top = float(np.max(np.linalg.eigvalsh(0.5 * (S + S.T))))
        if top >= 0:
            raise CertificateError(
                f"P_y does not decrease along the reduced closed loop "
                f"(max eigenvalue {top:.3e}); P does not fit these blocks")
    return BacksteppingPartition(P_y=P_y, P12=np.asarray(P12, dtype=float),
                                 P22=P22, T=T, local_inner_gain=gain)


def backstepping_clf(V_y, alpha_y, P22, alpha_y_grad=None, expected_inner_gain=None):
    """Composite V(y, x) = V_y(y) + P22 (x - alpha_y(y))^2.

    The input derivative of the composite is 2 P22 (x - alpha_y(y)) g, so
    it vanishes exactly on the manifold x = alpha_y(y). alpha_y must
    vanish at 0; when expected_inner_gain is given, the slope of alpha_y
    at 0 must match it (finite-difference check), otherwise construction
    is refused.
    """
    P22 = float(P22)
    if P22 <= 0:
        raise ValueError("P22 must be positive")
    n_y = V_y.n
    z = np.zeros(n_y)
    if abs(float(alpha_y(z))) > 1e-12:
        raise ValueError("alpha_y(0) must vanish")
    grad = alpha_y_grad if alpha_y_grad is not None else \
        (lambda y: numdiff.gradient(lambda w: float(alpha_y(w)), y))
    K = np.asarray(grad(z), dtype=float).reshape(n_y)
    K_fd = numdiff.gradient(lambda w: float(alpha_y(w)), z)
    if np.linalg.norm(K - K_fd) > 1e-4 * (1.0 + np.linalg.norm(K)):
        raise ValueError("alpha_y_grad disagrees with finite differences at 0")
    if expected_inner_gain is not None:
        expected = np.asarray(expected_inner_gain, dtype=float).reshape(n_y)
        if np.linalg.norm(K - expected) > 1e-6 * (1.0 + np.linalg.norm(expected)):
            raise CertificateError(
                f"inner gain mismatch at the origin: alpha_y slope {K} vs "
                f"prescribed {expected}")

    P_y = 0.5 * V_y.hessian_origin
    H = np.zeros((n_y + 1, n_y + 1))
    H[:n_y, :n_y] = 2.0 * P_y + 2.0 * P22 * np.outer(K, K)
    H[:n_y, n_y] = -2.0 * P22 * K
    H[n_y, :n_y] = -2.0 * P22 * K
    H[n_y, n_y] = 2.0 * P22

    def value(chi):
        y, x = chi[:n_y], chi[n_y]
        e = x - float(alpha_y(y))
        return V_y.value(y) + P22 * e * e

    def gradient(chi):
        y, x = chi[:n_y], chi[n_y]
        e = x - float(alpha_y(y))
        gy = V_y.gradient(y) - 2.0 * P22 * e * np.asarray(grad(y), dtype=float).reshape(n_y)
        return np.append(gy, 2.0 * P22 * e)

    return Clf(n_y + 1, value, gradient, hessian_origin=H)


def backstepping_synthesize(sys, K_o, inner_clf_factory=None, P=None,
                            lyapunov_weight=None, box=None, level_grid=None,
                            n_samples=2000, seed=0):
    """Full cascade design: composite Lyapunov function plus blended law.

    P defaults to the Lyapunov solution for the prescribed closed loop
    (pass the Riccati solution instead to anchor the inverse-optimal
    machinery). The default inner pair is the quadratic V_y with the
    linear gain read off the partition; a custom factory(P_y, gain) may
    return (V_y, alpha_y, alpha_y_grad). The composite must pass the
    sampled Lyapunov test on the working box before any law is built.
    """
    A, B = sys.assemble()
    K_o = np.asarray(K_o, dtype=float).reshape(1, sys.n)
    if not is_hurwitz(A + B @ K_o):
        raise ValueError("K_o does not stabilize the cascade linearization")
    if P is None:
        W = np.eye(sys.n) if lyapunov_weight is None else np.asarray(lyapunov_weight, dtype=float)
        P = solve_lyapunov(A + B @ K_o, W)
    part = backstepping_partition(P, blocks=(sys.H1, sys.H2))
    if inner_clf_factory is None:
        gain = part.local_inner_gain

        def alpha_y(y):
            return float(gain @ y)

        V_y = local_quadratic_clf(part.P_y)
        grad = lambda y: gain
    else:
        V_y, alpha_y, grad = inner_clf_factory(part.P_y, part.local_inner_gain)
    V = backstepping_clf(V_y, alpha_y, part.P22, alpha_y_grad=grad,
                         expected_inner_gain=part.local_inner_gain)
    full = sys.to_control_affine()
    if level_grid is None:
        level_grid = np.geomspace(0.05, 2.0, 24)
    if box is None:
        box = quadratic_level_box(0.5 * V.hessian_origin, max(level_grid), slack=1.25)
    report = check_artstein_sampled(V, full, box, n_samples=n_samples, seed=seed)
    alpha_inf = sontag_controller(V, full, artstein_report=report)
    r0 = find_r0(V, full, K_o, level_grid, n_samples=n_samples, box=box, seed=seed)
    law = blended_controller(alpha_inf, K_o, V, blend_profile(r0))
    law.metadata.update({"r0": r0, "partition": part.to_dict()})
    return V, law


def additive_forward_clf(V_x, weight, label="appended coordinate"):
    """V(chi) = V_x(chi[:-1]) + weight * chi[-1]^2 on one more coordinate.

    The label documents what the appended coordinate measures (e.g. an
    equilibrium offset); it is metadata only.
    """
    weight = float(weight)
    if weight <= 0:
        raise ValueError("weight must be positive")
    n = V_x.n + 1

    def value(chi):
        return V_x.value(chi[:-1]) + weight * chi[-1] ** 2

    def gradient(chi):
        return np.append(V_x.gradient(chi[:-1]), 2.0 * weight * chi[-1])

    H = block_diag(V_x.hessian_origin, 2.0 * weight)
    V = Clf(n, value, gradient, hessian_origin=H)
    V.label = label
    return V
