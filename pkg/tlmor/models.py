"""
Model I/O and benchmark generators.

Models are stored as three Matrix Market files A.mtx, B.mtx and C.mtx
(coordinate or array format, real or integer fields) and read densely.
"""

import math
import os
from collections.abc import Mapping

import numpy as np
import scipy.io
import scipy.sparse

from tlmor.numkit import DimensionError, TlmorError
from tlmor.sysmodel import StateSpace
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)
MODEL_FILES = {"A": "A.mtx", "B": "B.mtx", "C": "C.mtx"}
MM_HEADER = "%%MatrixMarket"
MM_FORMATS = ("coordinate", "array")
MM_FIELDS = ("real", "integer", "pattern")
MM_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


class ModelFormatError(TlmorError):
    def __init__(self, path, line, reason):
        self.path = path
        self.line = line
        self.reason = reason

    def __str__(self):
        location = f"{self.path}:{self.line}" if self.line else self.path
        return f"Invalid Matrix Market file {location}: {self.reason}"


class DimensionMismatchError(DimensionError):
    def __init__(self, path, name, shape, expected):
        super().__init__(name=name, shape=shape, expected=expected)
        self.path = path

    def __str__(self):
        return f"{self.path}: {super().__str__()}"


def _data_lines(lines):
    for number, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if stripped and not stripped.startswith("%"):
            yield number, stripped.split()


def _parse_numbers(tokens, kinds):
    try:
        return [kind(token) for kind, token in zip(kinds, tokens, strict=True)]
    except ValueError:
        return None


def _scan_matrix_market(path):
    """
    Structural check of a Matrix Market file.

    Returns:
        tuple: (line, reason) of the first problem, None for a well-formed file.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as stream:
        lines = stream.read().splitlines()

    header = lines[0].split() if lines else []
    if not header or header[0] != MM_HEADER:
        return 1, f"missing {MM_HEADER} header"

    if len(header) != 5 or header[1].lower() != "matrix":
        return 1, f"malformed header '{lines[0]}'"

    layout, field, symmetry = (token.lower() for token in header[2:])
    if layout not in MM_FORMATS or field not in MM_FIELDS or symmetry not in MM_SYMMETRIES:
        return 1, f"unsupported matrix type '{layout} {field} {symmetry}'"

    if field == "pattern" and layout == "array":
        return 1, "pattern field requires coordinate format"

    data = _data_lines(lines=lines)
    size = next(data, None)
    if size is None:
        return len(lines) + 1, "missing size line"

    number, tokens = size
    dims = _parse_numbers(tokens=tokens, kinds=[int] * (3 if layout == "coordinate" else 2))
    if dims is None or min(dims) < 0:
        return number, f"malformed size line '{' '.join(tokens)}'"

    if layout == "coordinate":
        rows, cols, expected = dims
        kinds = [int, int] if field == "pattern" else [int, int, float]
    else:
        rows, cols = dims
        expected = rows * cols if symmetry == "general" else rows * (rows + 1) // 2
        kinds = [float]

    count = 0
    for number, tokens in data:
        values = _parse_numbers(tokens=tokens, kinds=kinds)
        if values is None:
            return number, f"malformed entry '{' '.join(tokens)}'"

        if layout == "coordinate" and not (1 <= values[0] <= rows and 1 <= values[1] <= cols):
            return number, f"entry index ({values[0]}, {values[1]}) outside {rows} x {cols}"

        count += 1

    if count != expected:
        return len(lines), f"expected {expected} entries, found {count}"

    return None


def read_matrix(path):
    """
    Read a dense matrix from a Matrix Market file.

    Raises:
        ModelFormatError: Malformed file, with the offending line number.
    """
    if not os.path.isfile(path):
        raise ModelFormatError(path=path, line=None, reason="file not found")

    problem = _scan_matrix_market(path=path)
    if problem:
        line, reason = problem
        raise ModelFormatError(path=path, line=line, reason=reason)

    try:
        matrix = scipy.io.mmread(path)
    except ValueError as exp:
        raise ModelFormatError(path=path, line=None, reason=str(exp)) from exp

    if scipy.sparse.issparse(matrix):
        matrix = matrix.toarray()

    return np.asarray(matrix, dtype=float)


def _model_paths(paths):
    if isinstance(paths, Mapping):
        missing = set(MODEL_FILES) - set(paths)
        if missing:
            raise ModelFormatError(path=str(dict(paths)), line=None, reason=f"missing matrices {sorted(missing)}")
        return {name: os.fspath(paths[name]) for name in MODEL_FILES}

    if isinstance(paths, (str, os.PathLike)):
        return {name: os.path.join(os.fspath(paths), filename) for name, filename in MODEL_FILES.items()}

    paths = [os.fspath(path) for path in paths]
    if len(paths) != 3:
        raise ModelFormatError(path=str(paths), line=None, reason="expected the A, B and C files")

    return dict(zip(MODEL_FILES, paths))


def load_model(paths):
    """
    Load a state-space model from Matrix Market files.

    Args:
        paths (str, list or dict): Directory holding A.mtx, B.mtx and C.mtx, a sequence
            of the three file paths, or a mapping with keys A, B and C.

    Returns:
        StateSpace: Dense model.

    Raises:
        ModelFormatError: A file is missing or malformed.
        DimensionMismatchError: Inconsistent matrix sizes.
    """
    files = _model_paths(paths=paths)
    matrices = {name: read_matrix(path=path) for name, path in files.items()}
    A, B, C = matrices["A"], matrices["B"], matrices["C"]
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatchError(path=files["A"], name="A", shape=A.shape, expected=(n, n))

    if B.shape[0] != n:
        raise DimensionMismatchError(path=files["B"], name="B", shape=B.shape, expected=(n, "m"))

    if C.shape[1] != n:
        raise DimensionMismatchError(path=files["C"], name="C", shape=C.shape, expected=("p", n))

    LOGGER.info(f"Loaded model n={n} m={B.shape[1]} p={C.shape[0]} from {files['A']}")
    return StateSpace(A=A, B=B, C=C)


def write_model(sys, directory, comment=""):
    """
    Write A.mtx, B.mtx and C.mtx (array format, full precision) into directory.

    Returns:
        dict: Written file paths keyed by matrix name.
    """
    os.makedirs(directory, exist_ok=True)
    files = {}
    for name, filename in MODEL_FILES.items():
        files[name] = os.path.join(directory, filename)
        scipy.io.mmwrite(files[name], getattr(sys, name), comment=comment, field="real", precision=17)

    LOGGER.info(f"Wrote model n={sys.n} m={sys.m} p={sys.p} to {directory}")
    return files


def generate_heat_rod(n, diffusivity=1.0):
    """
    Heat equation on a unit rod, central differences with n interior nodes.

    Dirichlet ends, the input drives the left boundary and the output is the
    temperature at node ceil(n/2). A = k (n+1)^2 tridiag(1, -2, 1), B = k (n+1)^2 e_1.

    Args:
        n (int): Number of interior nodes, at least 3.
        diffusivity (float): Thermal diffusivity k > 0.

    Returns:
        StateSpace: SISO model with symmetric negative definite A.
    """
    if n < 3:
        raise ValueError(f"Heat rod needs at least 3 nodes, got {n}")

    if diffusivity <= 0:
        raise ValueError(f"Diffusivity must be positive, got {diffusivity}")

    scale = diffusivity * (n + 1) ** 2
    A = scale * (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    B = np.zeros((n, 1))
    B[0, 0] = scale
    C = np.zeros((1, n))
    C[0, math.ceil(n / 2) - 1] = 1.0
    return StateSpace(A=A, B=B, C=C)


def generate_random_stable(n, m=1, p=1, seed=0):
    """
    Seeded random model with A = M - (||M||_2 + 1) I, so every eigenvalue has Re <= -1.

    Returns:
        StateSpace: Deterministic for a fixed seed.
    """
    if min(n, m, p) < 1:
        raise ValueError(f"Dimensions must be positive, got n={n} m={m} p={p}")

    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    A = M - (np.linalg.norm(M, 2) + 1) * np.eye(n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    return StateSpace(A=A, B=B, C=C)


GENERATORS = {
    "heat_rod": generate_heat_rod,
    "random": generate_random_stable,
}


def generate_model(name, **kwargs):
    """
    Build a model from a generator name and its parameters.

    Raises:
        ValueError: Unknown generator.
    """
    generator = GENERATORS.get(name)
    if generator is None:
        raise ValueError(f"Unknown generator {name}, expected one of {sorted(GENERATORS)}")

    LOGGER.info(f"Generating {name} model with {kwargs}")
    return generator(**kwargs)
