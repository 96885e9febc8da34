"""Versioned plain-text wavefunction files.

Layout (``%.17g`` numbers, LF line endings)::

    ECGWF 1
    [system] <name>
    particles <N>
    <mass> <charge> <label>          N lines
    groups <G>
    <i,j,...>                        G lines
    [frame]
    reference <r> eliminated <e>
    <row of U>                       N-1 lines
    [basis] <M> <n>
    <tag> <coefficient> <lower triangle of A, row-wise>   M lines
    [energy] <E>
    [seed] <seed or none>
    [digest] <hex>
    [end]

Only the primitive of every function is stored; its symmetrized form is
rebuilt from the group list on load.  The tag is ``sym<|G|>`` when
identical particles are present and ``plain`` otherwise.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .ecg import EcgPrimitive, symmetrize
from .engine import Wavefunction, assemble
from .system import Particle, SystemDefinition, frame_from_ti_block

MAGIC = "ECGWF"
VERSION = 1
RAYLEIGH_TOLERANCE = 1e-9


class WavefunctionFileError(ValueError):
    pass


class DigestMismatchWarning(UserWarning):
    pass


def _num(x) -> str:
    return "%.17g" % float(x)


def _tag(system: SystemDefinition) -> str:
    order = len(system.group_permutations())
    return f"sym{order}" if order > 1 else "plain"


def format_wavefunction(psi: Wavefunction) -> str:
    system, frame = psi.system, psi.frame
    lines = [f"{MAGIC} {VERSION}", f"[system] {system.name}", f"particles {system.n_particles}"]
    for p in system.particles:
        if any(ch.isspace() for ch in p.label):
            raise ValueError(f"particle label {p.label!r} contains whitespace")
        lines.append(f"{_num(p.mass)} {_num(p.charge)} {p.label or '-'}")
    lines.append(f"groups {len(system.identical_groups)}")
    lines.extend(",".join(str(i) for i in g) for g in system.identical_groups)
    lines += ["[frame]", f"reference {frame.reference} eliminated {frame.eliminated}"]
    lines.extend(" ".join(_num(x) for x in row) for row in frame.ti_block)
    n = frame.n_coords
    rows, cols = np.tril_indices(n)
    tag = _tag(system)
    lines.append(f"[basis] {psi.size} {n}")
    for c, A in zip(psi.coefficients, psi.primitives()):
        lines.append(" ".join([tag, _num(c)] + [_num(x) for x in A[rows, cols]]))
    lines.append(f"[energy] {_num(psi.energy)}")
    lines.append(f"[seed] {psi.seed if psi.seed is not None else 'none'}")
    lines.append(f"[digest] {psi.config_digest or 'none'}")
    lines.append("[end]")
    return "\n".join(lines) + "\n"


def save_wavefunction(psi: Wavefunction, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_wavefunction(psi))
    except OSError as exc:
        raise OSError(f"cannot write wavefunction to {path}: {exc}") from exc
    return path


class _Reader:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0
        self.section = "header"
        self.last_complete = "none"

    def fail(self, message: str):
        raise WavefunctionFileError(
            f"line {self.pos}: {message} (in section [{self.section}]; last complete section: {self.last_complete})"
        )

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise WavefunctionFileError(
                f"file truncated inside section [{self.section}]; last complete section: {self.last_complete}"
            )
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def enter(self, name: str) -> list[str]:
        line = self.next()
        parts = line.split()
        if not parts or parts[0] != f"[{name}]":
            self.fail(f"expected section [{name}], got {line!r}")
        self.last_complete, self.section = self.section, name
        return parts[1:]

    def fields(self, key: str, count: int) -> list[str]:
        parts = self.next().split()
        if len(parts) != count + 1 or parts[0] != key:
            self.fail(f"expected '{key}' with {count} value(s)")
        return parts[1:]

    def floats(self, count: int) -> list[float]:
        parts = self.next().split()
        if len(parts) != count:
            self.fail(f"expected {count} numbers")
        return [float(x) for x in parts]


def parse_wavefunction(text: str, *, expected_digest: str | None = None, verify: bool = True) -> Wavefunction:
    """Parse file text; structural problems raise :class:`WavefunctionFileError`."""
    r = _Reader(text)
    try:
        return _parse(r, expected_digest, verify)
    except WavefunctionFileError:
        raise
    except (ValueError, IndexError) as exc:
        r.fail(f"malformed content: {exc}")


def _parse(r: _Reader, expected_digest, verify) -> Wavefunction:
    header = r.next().split()
    if len(header) != 2 or header[0] != MAGIC:
        raise WavefunctionFileError("not a wavefunction file (missing ECGWF header)")
    if header[1] != str(VERSION):
        raise WavefunctionFileError(f"unsupported file version {header[1]}; this reader handles {VERSION}")

    name = r.enter("system")
    n_particles = int(r.fields("particles", 1)[0])
    particles = []
    for _ in range(n_particles):
        parts = r.next().split()
        if len(parts) != 3:
            r.fail("expected 'mass charge label'")
        particles.append(Particle(float(parts[0]), float(parts[1]), "" if parts[2] == "-" else parts[2]))
    n_groups = int(r.fields("groups", 1)[0])
    groups = [tuple(int(i) for i in r.next().split(",")) for _ in range(n_groups)]
    system = SystemDefinition(tuple(particles), tuple(groups), name[0] if name else "custom")

    r.enter("frame")
    parts = r.next().split()
    if len(parts) != 4 or parts[0] != "reference" or parts[2] != "eliminated":
        r.fail("expected 'reference <r> eliminated <e>'")
    U = np.array([r.floats(n_particles) for _ in range(n_particles - 1)])
    frame = frame_from_ti_block(system.masses, U, int(parts[1]), int(parts[3]))

    size, n = (int(x) for x in r.enter("basis"))
    if n != frame.n_coords:
        raise WavefunctionFileError(f"basis dimension {n} does not match the frame ({frame.n_coords})")
    rows, cols = np.tril_indices(n)
    tag = _tag(system)
    coefficients = np.empty(size)
    basis = []
    for k in range(size):
        parts = r.next().split()
        if len(parts) != 2 + rows.size:
            r.fail(f"basis function {k} has the wrong number of fields")
        if parts[0] != tag:
            r.fail(f"symmetrization tag {parts[0]!r} does not match {tag!r}")
        values = [float(x) for x in parts[1:]]
        coefficients[k] = values[0]
        A = np.zeros((n, n))
        A[rows, cols] = values[1:]
        A[cols, rows] = values[1:]
        basis.append(symmetrize(EcgPrimitive(A, frame.frame_id), system, frame))

    energy = float(r.enter("energy")[0])
    seed_text = r.enter("seed")[0]
    digest = r.enter("digest")[0]
    r.enter("end")
    seed = None if seed_text == "none" else int(seed_text)
    digest = "" if digest == "none" else digest

    if expected_digest is not None and digest != expected_digest:
        warnings.warn(f"config digest {digest[:12]} differs from expected {expected_digest[:12]}", DigestMismatchWarning, stacklevel=2)

    psi = Wavefunction(system, frame, tuple(basis), coefficients, energy, seed, digest)
    if verify and size:
        H, S = assemble(psi.basis, system, frame)
        rayleigh = float(coefficients @ H @ coefficients / (coefficients @ S @ coefficients))
        if abs(rayleigh - energy) > RAYLEIGH_TOLERANCE * max(1.0, abs(energy)):
            raise WavefunctionFileError(f"stored energy {energy!r} disagrees with the Rayleigh quotient {rayleigh!r}")
    return psi


def load_wavefunction(path, *, expected_digest: str | None = None, verify: bool = True) -> Wavefunction:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read wavefunction from {path}: {exc}") from exc
    return parse_wavefunction(text, expected_digest=expected_digest, verify=verify)
