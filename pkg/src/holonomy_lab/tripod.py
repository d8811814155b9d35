"""Four-level tripod model: Hamiltonian, dark/bright frame, loops.

Three ground levels |0>, |1>, |a> couple to one excited level |e> with real
Rabi amplitudes constrained to a sphere of radius omega (the constant energy
gap):

    Omega_1 = omega sin(theta) cos(phi)
    Omega_0 = omega sin(theta) sin(phi)
    Omega_a = omega cos(theta)

Bare basis order is (|0>, |1>, |a>, |e>).  The instantaneous eigenframe
consists of two zero-energy dark states D0, D1 spanning the computational
space and two bright states D+/- at energies +/-omega; frame order is
(D0, D1, D+, D-) everywhere.

Control loops on the (theta, phi) sphere are piecewise segments that move
one angle at a time at constant rate, which keeps the non-adiabatic
coupling generator constant along each segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import expm_generator

#: angular tolerance for pole detection and path continuity checks
ANGLE_ATOL = 1e-9

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SpherePoint:
    """Point on the control sphere; theta in [0, pi], phi unwrapped real."""
    theta: float
    phi: float

    def __post_init__(self):
        if not (-ANGLE_ATOL <= self.theta <= math.pi + ANGLE_ATOL):
            raise ValidationError(f"theta {self.theta} outside [0, pi]")

    @property
    def at_pole(self) -> bool:
        return self.theta <= ANGLE_ATOL or self.theta >= math.pi - ANGLE_ATOL


@dataclass(frozen=True)
class PathSegment:
    """Constant-rate move of a single angle, starting from `start`.

    Exactly one of theta_rate, phi_rate may be nonzero (both zero is a hold
    segment); mixing the two would make the coupling generator time
    dependent within the segment and invalidate the exact propagator.
    """
    start: SpherePoint
    theta_rate: float
    phi_rate: float
    duration: float

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValidationError("segment duration must be positive")
        if self.theta_rate != 0.0 and self.phi_rate != 0.0:
            raise ValidationError(
                "segments move one angle at a time (theta_rate or phi_rate, not both)")
        end_theta = self.start.theta + self.theta_rate * self.duration
        if not (-ANGLE_ATOL <= end_theta <= math.pi + ANGLE_ATOL):
            raise ValidationError(f"segment leaves theta range: end theta {end_theta}")

    @property
    def end(self) -> SpherePoint:
        return SpherePoint(
            min(max(self.start.theta + self.theta_rate * self.duration, 0.0), math.pi),
            self.start.phi + self.phi_rate * self.duration)

    def point_at(self, t: float) -> SpherePoint:
        """Position a local time t in [0, duration] into the segment."""
        return SpherePoint(
            min(max(self.start.theta + self.theta_rate * t, 0.0), math.pi),
            self.start.phi + self.phi_rate * t)


def _points_match(a: SpherePoint, b: SpherePoint) -> bool:
    # phi is degenerate at the poles, so only theta must agree there
    if abs(a.theta - b.theta) > ANGLE_ATOL:
        return False
    if a.at_pole and b.at_pole:
        return True
    return abs(a.phi - b.phi) <= ANGLE_ATOL


@dataclass(frozen=True)
class PathSpec:
    """Ordered chain of segments on the control sphere.

    Continuity is enforced at construction (with the pole exception: phi may
    jump where theta is 0 or pi).  Closure is required only by the loop
    operations that consume the path, so partially built chains remain
    representable.
    """
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValidationError("path needs at least one segment")
        object.__setattr__(self, "segments", segs)
        for prev, nxt in zip(segs, segs[1:]):
            if not _points_match(prev.end, nxt.start):
                raise ValidationError(
                    f"discontinuous path: segment ends at ({prev.end.theta}, {prev.end.phi}) "
                    f"but next starts at ({nxt.start.theta}, {nxt.start.phi})")

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def start(self) -> SpherePoint:
        return self.segments[0].start

    @property
    def end(self) -> SpherePoint:
        return self.segments[-1].end

    def is_closed(self) -> bool:
        return _points_match(self.start, self.end)


def require_closed(path: PathSpec) -> None:
    if not path.is_closed():
        raise ValidationError("path is not a closed loop")


@dataclass(frozen=True)
class TripodFrame:
    """Instantaneous eigenframe at a sphere point.

    basis holds the frame vectors as columns (D0, D1, D+, D-) in the bare
    basis; energies are (0, 0, +omega, -omega).
    """
    point: SpherePoint
    basis: np.ndarray
    energies: np.ndarray


def rabi_amplitudes(p: SpherePoint, omega: float = 1.0) -> tuple:
    """(Omega_0, Omega_1, Omega_a) at a sphere point."""
    st, ct = math.sin(p.theta), math.cos(p.theta)
    sp, cp = math.sin(p.phi), math.cos(p.phi)
    return omega * st * sp, omega * st * cp, omega * ct


def hamiltonian(p: SpherePoint, omega: float = 1.0) -> np.ndarray:
    """Tripod Hamiltonian in the bare basis (|0>,|1>,|a>,|e>).

    Only the |e> row/column is populated off-diagonal; all entries are real.
    Eigenvalues are {0, 0, +omega, -omega} for every point on the sphere.
    """
    if omega <= 0.0:
        raise ValidationError("omega must be positive")
    om0, om1, oma = rabi_amplitudes(p, omega)
    h = np.zeros((4, 4), dtype=complex)
    h[3, 0] = h[0, 3] = om0
    h[3, 1] = h[1, 3] = om1
    h[3, 2] = h[2, 3] = oma
    return h


def basis_matrix(p: SpherePoint) -> np.ndarray:
    """Frame vectors as columns of a 4x4 unitary, in the bare basis."""
    st, ct = math.sin(p.theta), math.cos(p.theta)
    sp, cp = math.sin(p.phi), math.cos(p.phi)
    f = np.zeros((4, 4), dtype=complex)
    f[:, 0] = (cp, -sp, 0.0, 0.0)
    f[:, 1] = (ct * sp, ct * cp, -st, 0.0)
    f[:, 2] = (st * sp / SQRT2, st * cp / SQRT2, ct / SQRT2, 1.0 / SQRT2)
    f[:, 3] = (st * sp / SQRT2, st * cp / SQRT2, ct / SQRT2, -1.0 / SQRT2)
    return f


def frame(p: SpherePoint, omega: float = 1.0) -> TripodFrame:
    """Dark/bright eigenframe from the explicit closed-form vectors."""
    return TripodFrame(point=p, basis=basis_matrix(p),
                       energies=np.array([0.0, 0.0, omega, -omega]))


def connection(p: SpherePoint, theta_rate: float, phi_rate: float) -> np.ndarray:
    """Non-adiabatic coupling generator in the frame at p.

    This is the Hermitian matrix -i F(p)^dag dF/dt built from the frame
    vectors; it depends on theta and the two angular rates but not on phi.
    For one-angle-at-a-time segments it is constant along the segment.
    """
    st, ct = math.sin(p.theta), math.cos(p.theta)
    upper = np.zeros((4, 4))
    upper[0, 1] = phi_rate * ct
    upper[0, 2] = upper[0, 3] = phi_rate * st / SQRT2
    upper[1, 2] = upper[1, 3] = theta_rate / SQRT2
    return -1j * (upper - upper.T)


def adiabatic_connection(p: SpherePoint) -> tuple:
    """Connection one-forms restricted to the dark (computational) block.

    Returns the pair (A_theta, A_phi) of 2x2 matrices in the (D0, D1)
    ordering: A_theta vanishes identically and A_phi = cos(theta) * K with
    K = [[0, 1], [-1, 0]].
    """
    a_theta = np.zeros((2, 2), dtype=complex)
    a_phi = math.cos(p.theta) * np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    return a_theta, a_phi


def solid_angle(path: PathSpec) -> float:
    """Oriented solid angle enclosed by a closed loop.

    Computed analytically per segment with the north pole as cap reference:
    meridian moves contribute nothing, a phi-arc at colatitude theta
    contributes dphi * (1 - cos(theta)).  phi jumps at the poles carry no
    area, so pole-anchored loops need no closure correction.
    """
    require_closed(path)
    total = 0.0
    for seg in path.segments:
        if seg.phi_rate != 0.0:
            dphi = seg.phi_rate * seg.duration
            total += dphi * (1.0 - math.cos(seg.start.theta))
    return total


def adiabatic_holonomy(path: PathSpec) -> np.ndarray:
    """Geometric transformation of the computational block for a closed loop.

    Only one generator appears, so the path-ordered product collapses to
    exp(solid_angle * K) with K = [[0, 1], [-1, 0]]; a solid angle of pi/2
    gives the NOT matrix (up to the sign of one basis state).
    """
    w = solid_angle(path)
    c, s = math.cos(w), math.sin(w)
    return np.array([[c, s], [-s, c]], dtype=complex)


def not_gate_path(tau: float) -> PathSpec:
    """NOT-gate loop: pole -> equator -> quarter arc -> pole, equal times.

    Each arc spans pi/2 radians in time tau/3, giving angular speed
    3*pi/(2*tau) on every segment and an enclosed solid angle of pi/2.
    """
    return generalized_loop_path(tau, 1)


def generalized_loop_path(tau: float, n: int = 1) -> PathSpec:
    """Pole-anchored loop with an equatorial arc of pi/(2n) radians.

    All three segments are covered at the same constant angular speed, so
    the meridians take equal times and the arc takes 1/n of that; the
    enclosed solid angle is pi/(2n).  n = 1 reproduces the NOT-gate loop
    with equal segment times.
    """
    if tau <= 0.0:
        raise ValidationError("tau must be positive")
    if n < 1:
        raise ValidationError("n must be a positive integer")
    half_pi = 0.5 * math.pi
    arc = half_pi / n
    speed = (2.0 * half_pi + arc) / tau
    t_meridian = half_pi / speed
    t_arc = arc / speed
    return PathSpec((
        PathSegment(SpherePoint(0.0, 0.0), speed, 0.0, t_meridian),
        PathSegment(SpherePoint(half_pi, 0.0), 0.0, speed, t_arc),
        PathSegment(SpherePoint(half_pi, arc), -speed, 0.0, t_meridian),
    ))


def reverse_path(path: PathSpec) -> PathSpec:
    """Same loop traversed in the opposite orientation."""
    segs = [PathSegment(s.end, -s.theta_rate, -s.phi_rate, s.duration)
            for s in reversed(path.segments)]
    return PathSpec(tuple(segs))


def pole_relabeling(prev_end: SpherePoint, start: SpherePoint) -> np.ndarray | None:
    """Frame change across a phi jump at a pole, or None if frames agree.

    The physical configuration is identical on both sides of the jump; only
    the dark-state labels rotate.  The returned unitary maps old frame
    labels to new ones.
    """
    if abs(prev_end.phi - start.phi) <= ANGLE_ATOL and \
            abs(prev_end.theta - start.theta) <= ANGLE_ATOL:
        return None
    if not _points_match(prev_end, start):
        raise ValidationError("segments disagree at a non-pole point")
    return basis_matrix(prev_end).conj().T @ basis_matrix(start)


def frame_transport(seg: PathSegment, t: float | None = None) -> np.ndarray:
    """Overlap matrix between the segment-start frame and the frame at time t.

    Equals exp(i t K) with K the segment's constant coupling generator, and
    coincides with F(start)^dag F(point_at(t)) built from the explicit
    frame vectors.
    """
    if t is None:
        t = seg.duration
    k = connection(seg.start, seg.theta_rate, seg.phi_rate)
    return expm_generator(1j * k, t)


def format_path(path: PathSpec) -> str:
    """Serialize to the plain-text segment list used by the CLI.

    One segment per line: `theta0 phi0 dtheta dphi duration`, where dtheta
    and dphi are the angular rates (radians per unit time).
    """
    lines = ["# theta0 phi0 dtheta dphi duration"]
    for s in path.segments:
        lines.append("%.17g %.17g %.17g %.17g %.17g" % (
            s.start.theta, s.start.phi, s.theta_rate, s.phi_rate, s.duration))
    return "\n".join(lines) + "\n"


def parse_path(text: str) -> PathSpec:
    """Parse the plain-text segment list produced by format_path."""
    segs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ValidationError(
                f"path line {lineno}: expected 5 fields, got {len(fields)}")
        try:
            th0, ph0, dth, dph, dur = (float(x) for x in fields)
        except ValueError as exc:
            raise ValidationError(f"path line {lineno}: {exc}") from None
        segs.append(PathSegment(SpherePoint(th0, ph0), dth, dph, dur))
    if not segs:
        raise ValidationError("path text contains no segments")
    return PathSpec(tuple(segs))
