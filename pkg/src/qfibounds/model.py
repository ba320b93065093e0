"""Markovian sensing models: representation, validation, built-ins and I/O.

A model is stored as point data at the operating parameter value: the
Hamiltonian ``H``, its parameter derivative ``Hdot``, the jump operators
``L`` and their derivatives ``Ldot``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

BUILTIN_IDS = ("PD", "RD", "PDDS", "PDDD", "NOISELESS")
RD_ANGLE = math.pi / 15


def sigma(theta: float) -> np.ndarray:
    """Pauli operator along the direction ``cos(theta) z + sin(theta) x``."""
    return math.cos(theta) * SIGMA_Z + math.sin(theta) * SIGMA_X


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_zero(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a), initial=0.0) <= tol)


class ModelFormatError(ValueError):
    """Raised when a model file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class MarkovianModel:
    H: np.ndarray
    Hdot: np.ndarray
    L: tuple[np.ndarray, ...] = ()
    Ldot: tuple[np.ndarray, ...] = ()
    label: str = ""

    def __post_init__(self):
        # store read-only complex copies so instances can be shared freely
        for name in ("H", "Hdot"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "L", tuple(_frozen(m) for m in self.L))
        object.__setattr__(self, "Ldot", tuple(_frozen(m) for m in self.Ldot))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def n_jumps(self) -> int:
        return len(self.L)

    def replace(self, **changes) -> "MarkovianModel":
        kw = dict(H=self.H, Hdot=self.Hdot, L=self.L, Ldot=self.Ldot, label=self.label)
        kw.update(changes)
        return MarkovianModel(**kw)

    def scaled_derivatives(self, s: float) -> "MarkovianModel":
        """Model with ``Hdot`` and every ``Ldot`` multiplied by ``s``."""
        return self.replace(Hdot=s * self.Hdot, Ldot=tuple(s * m for m in self.Ldot))

    def equals(self, other: "MarkovianModel") -> bool:
        """Exact entrywise equality (used for round-trip checks)."""
        if self.label != other.label or self.n_jumps != other.n_jumps:
            return False
        pairs = [(self.H, other.H), (self.Hdot, other.Hdot)]
        pairs += list(zip(self.L, other.L)) + list(zip(self.Ldot, other.Ldot))
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    if out.ndim == 0:
        out = out.reshape(1, 1)
    out.flags.writeable = False
    return out


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def validate_model(m: MarkovianModel, tol: float = HERMITIAN_TOL) -> ValidationReport:
    """Check the model invariants; every problem found is listed, nothing raises."""
    problems = []
    mats = {"H": m.H, "Hdot": m.Hdot}
    mats.update({f"L[{k}]": a for k, a in enumerate(m.L)})
    mats.update({f"Ldot[{k}]": a for k, a in enumerate(m.Ldot)})

    for name, a in mats.items():
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            problems.append(f"{name} is not square (shape {a.shape})")
        elif not np.all(np.isfinite(a)):
            problems.append(f"{name} has non-finite entries")

    shapes = {a.shape for a in mats.values()}
    if len(shapes) > 1:
        desc = ", ".join(f"{k}: {a.shape[0]}x{a.shape[1] if a.ndim > 1 else '?'}" for k, a in mats.items())
        problems.append(f"dimension mismatch ({desc})")

    if len(m.L) != len(m.Ldot):
        problems.append(f"L has {len(m.L)} operators but Ldot has {len(m.Ldot)}")

    for name in ("H", "Hdot"):
        a = mats[name]
        if a.ndim == 2 and a.shape[0] == a.shape[1] and np.all(np.isfinite(a)) and not is_hermitian(a, tol):
            problems.append(f"{name} not Hermitian")

    return ValidationReport(ok=not problems, problems=problems)


def builtin_model(model_id: str, omega: float = 1.0, gamma: float = 0.4, phi: float = 0.0) -> MarkovianModel:
    """One of the reference qubit models with ``H(phi) = phi * omega * sigma_z``.

    ``phi`` is the operating point; derivatives are taken analytically there.
    """
    model_id = model_id.upper()
    if model_id not in BUILTIN_IDS:
        raise ValueError(f"unknown built-in model {model_id!r}; choose from {', '.join(BUILTIN_IDS)}")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")

    H = phi * omega * SIGMA_Z
    Hdot = omega * SIGMA_Z
    r = math.sqrt(gamma / 2)
    zero = np.zeros((2, 2), dtype=complex)

    if model_id == "NOISELESS":
        L, Ldot = [], []
    elif model_id == "PD":
        L, Ldot = [r * SIGMA_Z], [zero]
    elif model_id == "RD":
        L, Ldot = [r * sigma(RD_ANGLE)], [zero]
    elif model_id == "PDDS":
        # L(phi) = r exp(phi) sigma_z
        L, Ldot = [r * math.exp(phi) * SIGMA_Z], [r * math.exp(phi) * SIGMA_Z]
    else:
        # L(phi) = r sigma(phi), d/dphi sigma(phi) = sigma(phi + pi/2)
        L, Ldot = [r * sigma(phi)], [r * sigma(phi + math.pi / 2)]

    return MarkovianModel(H=H, Hdot=Hdot, L=tuple(L), Ldot=tuple(Ldot), label=model_id)


def liouvillian_matrix(m: MarkovianModel) -> np.ndarray:
    """Matrix of the GKSL generator acting on row-major vectorised density matrices.

    With ``vec(A X B) = (A kron B.T) vec(X)`` for C-order flattening.
    """
    d = m.dim
    eye = np.eye(d)
    for a in (m.Hdot, *m.L):
        if a.shape != (d, d):
            raise ValueError(f"dimension mismatch: expected {d}x{d}, got {a.shape}")
    out = -1j * (np.kron(m.H, eye) - np.kron(eye, m.H.T))
    for Lk in m.L:
        LdL = Lk.conj().T @ Lk
        out += np.kron(Lk, Lk.conj()) - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return out


# ---------------------------------------------------------------------------
# serialisation

def _encode_matrix(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def _decode_matrix(obj, where: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: matrix entries must be [re, im] number pairs ({exc})") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ModelFormatError(f"{where}: expected a square nested array of [re, im] pairs, got shape {arr.shape}")
    out = np.empty(arr.shape[:2], dtype=complex)
    out.real, out.imag = arr[..., 0], arr[..., 1]
    return out


def model_to_dict(m: MarkovianModel) -> dict:
    return {
        "dim": m.dim,
        "label": m.label,
        "H": _encode_matrix(m.H),
        "Hdot": _encode_matrix(m.Hdot),
        "L": [_encode_matrix(a) for a in m.L],
        "Ldot": [_encode_matrix(a) for a in m.Ldot],
    }


def model_from_dict(obj: dict) -> MarkovianModel:
    if not isinstance(obj, dict):
        raise ModelFormatError("top level must be an object")
    for key in ("dim", "H", "Hdot", "L", "Ldot"):
        if key not in obj:
            raise ModelFormatError(f"missing field {key!r}")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ModelFormatError(f"field 'dim' must be a positive integer, got {dim!r}")
    for key in ("L", "Ldot"):
        if not isinstance(obj[key], list):
            raise ModelFormatError(f"field {key!r} must be an array of matrices")
    if len(obj["L"]) != len(obj["Ldot"]):
        raise ModelFormatError(f"arrays 'L' ({len(obj['L'])}) and 'Ldot' ({len(obj['Ldot'])}) differ in length")

    H = _decode_matrix(obj["H"], "H")
    Hdot = _decode_matrix(obj["Hdot"], "Hdot")
    L = [_decode_matrix(a, f"L[{k}]") for k, a in enumerate(obj["L"])]
    Ldot = [_decode_matrix(a, f"Ldot[{k}]") for k, a in enumerate(obj["Ldot"])]
    for name, a in [("H", H), ("Hdot", Hdot), *((f"L[{k}]", a) for k, a in enumerate(L)),
                    *((f"Ldot[{k}]", a) for k, a in enumerate(Ldot))]:
        if a.shape != (dim, dim):
            raise ModelFormatError(f"{name}: shape {a.shape} does not match dim={dim}")
    label = obj.get("label", "")
    if not isinstance(label, str):
        raise ModelFormatError("field 'label' must be a string")
    return MarkovianModel(H=H, Hdot=Hdot, L=tuple(L), Ldot=tuple(Ldot), label=label)


def dumps_model(m: MarkovianModel) -> str:
    return json.dumps(model_to_dict(m), indent=1) + "\n"


def loads_model(text: str) -> MarkovianModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return model_from_dict(obj)


def load_model(path) -> MarkovianModel:
    return loads_model(Path(path).read_text())


def save_model(m: MarkovianModel, path) -> None:
    write_atomic(path, dumps_model(m))


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def random_model(rng: np.random.Generator, dim: int, n_jumps: int, label: str = "random") -> MarkovianModel:
    """Model with entries uniform in [-1, 1] (real and imaginary parts); H, Hdot Hermitised."""

    def mat():
        return rng.uniform(-1, 1, (dim, dim)) + 1j * rng.uniform(-1, 1, (dim, dim))

    def herm():
        a = mat()
        return (a + a.conj().T) / 2

    return MarkovianModel(
        H=herm(),
        Hdot=herm(),
        L=tuple(mat() for _ in range(n_jumps)),
        Ldot=tuple(mat() for _ in range(n_jumps)),
        label=label,
    )

