"""Published architectures and hyperparameters, transcribed as data.

Layer tuples are ``(in_dim, out_dim, bias)``. Accuracy targets are kept next to
the hyperparameters they were reported with so reports can show both.
"""
from __future__ import annotations

from dataclasses import dataclass, field

ANSATZ_ORDER = ("SU4", "U6", "U13", "U15", "TTN")
EMBEDDING_ORDER = ("zz", "amplitude", "angle")

Layers = tuple[tuple[int, int, bool], ...]


def _lin(*dims: int, bias: bool = True) -> Layers:
    return tuple((a, b, bias) for a, b in zip(dims[:-1], dims[1:]))


# ---------------------------------------------------------------------------
# NQE front-ends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NQEPreset:
    key: str
    n_qubits: int
    embedding: str
    layers: Layers
    batch_size: int
    learning_rate: float
    iterations: int
    td_published: tuple[float, float, float, float] | None = None  # train/test before, train/test after


_NETS = {
    (4, "zz"): _lin(160, 8, 8),
    (4, "amplitude"): _lin(160, 64, 32, 16),
    (4, "angle"): _lin(160, 16, 8, 4),
    (8, "zz"): _lin(160, 64, 32, 16),
    (8, "amplitude"): _lin(160, 80, 256),
    (8, "angle"): _lin(160, 16, 8),
}

# (batch, lr, iterations) and trace distances (before train, before test, after train, after test)
_NQE_NOISELESS = {
    (4, "zz"): ((512, 0.01, 2000), (0.0641, 0.0713, 0.0854, 0.0986)),
    (4, "amplitude"): ((256, 0.01, 2000), (0.0253, 0.0314, 0.9972, 0.7642)),
    (4, "angle"): ((256, 0.008, 2000), (0.0010, 0.0003, 0.9695, 0.7671)),
    (8, "zz"): ((25, 0.01, 2000), (0.1509, 0.1855, 0.8154, 0.7296)),
    (8, "amplitude"): ((25, 0.02, 2000), (0.1388, 0.1768, 0.9634, 0.7569)),
    (8, "angle"): ((25, 0.01, 2000), (0.0006, 0.0017, 0.9820, 0.7923)),
}
_NQE_NOISY = {
    (4, "zz"): ((10, 0.01, 1000), (0.0659, 0.0569, 0.6658, 0.5715)),
    (4, "amplitude"): ((10, 0.0008, 50), (0.0280, 0.0434, 0.2487, 0.2339)),
    (4, "angle"): ((30, 0.0005, 1000), (0.0009, 2.04e-05, 0.5963, 0.5538)),
    (8, "zz"): ((10, 0.001, 2000), (0.1509, 0.1855, 0.5362, 0.4387)),
    (8, "amplitude"): ((10, 0.00008, 10), (0.1621, 0.1737, 0.1432, 0.1858)),
    (8, "angle"): ((20, 0.01, 500), (0.0062, 0.0041, 0.6736, 0.5841)),
}

# classical counterpart front-ends, trained with squared cosine similarity
_NQE_CLASSICAL = {
    (4, "zz"): (_lin(160, 16, 8), (25, 0.005, 1000)),
    (4, "amplitude"): (_lin(160, 32, 16), (25, 0.001, 1000)),
    (4, "angle"): (_lin(160, 80, 40, 4), (16, 0.0002, 1000)),
    (8, "zz"): (_lin(160, 32, 16), (25, 0.005, 1000)),
    (8, "amplitude"): (_lin(160, 320, 256), (25, 0.003, 1000)),
    (8, "angle"): (_lin(160, 16, 8), (25, 0.001, 1000)),
}


def nqe_key(n_qubits: int, embedding: str) -> str:
    return f"{n_qubits}q-{embedding}"


def nqe_preset(n_qubits: int, embedding: str, arm: str = "noiseless") -> NQEPreset:
    table = {"noiseless": _NQE_NOISELESS, "noisy": _NQE_NOISY}[arm]
    (batch, lr, iters), td = table[(n_qubits, embedding)]
    return NQEPreset(nqe_key(n_qubits, embedding), n_qubits, embedding, _NETS[(n_qubits, embedding)],
                     batch, lr, iters, td)


def classical_nqe_preset(n_qubits: int, embedding: str) -> NQEPreset:
    layers, (batch, lr, iters) = _NQE_CLASSICAL[(n_qubits, embedding)]
    return NQEPreset(nqe_key(n_qubits, embedding), n_qubits, embedding, layers, batch, lr, iters)


# ---------------------------------------------------------------------------
# QCNN condition matrix
# ---------------------------------------------------------------------------

# per (n_qubits, embedding): rows in ANSATZ_ORDER of (batch, lr, iterations, acc_without, acc_with)
_A_NOISELESS = {
    (4, "zz"): [(25, 0.01, 2000, 0.5256, 0.6201), (25, 0.007, 2000, 0.5321, 0.6075),
                (25, 0.009, 2000, 0.5226, 0.5307), (25, 0.01, 2000, 0.5055, 0.5246),
                (25, 0.02, 2000, 0.5055, 0.5201)],
    (4, "amplitude"): [(32, 0.01, 2000, 0.8297, 0.8859), (25, 0.01, 2000, 0.8085, 0.8849),
                       (16, 0.005, 2000, 0.8075, 0.8844), (25, 0.02, 2000, 0.8094, 0.8859),
                       (25, 0.005, 2000, 0.8095, 0.8869)],
    (4, "angle"): [(25, 0.006, 2000, 0.8392, 0.9246), (25, 0.01, 2000, 0.7528, 0.9226),
                   (25, 0.03, 2000, 0.7568, 0.9246), (25, 0.01, 2000, 0.9261, 0.9261),
                   (25, 0.005, 2000, 0.9231, 0.9251)],
    (8, "zz"): [(32, 0.01, 2000, 0.5512, 0.9005), (25, 0.005, 2000, 0.5342, 0.9045),
                (25, 0.007, 2000, 0.5352, 0.9030), (25, 0.01, 2000, 0.5507, 0.8945),
                (16, 0.008, 2000, 0.5312, 0.6287)],
    (8, "amplitude"): [(25, 0.01, 2000, 0.8824, 0.8935), (25, 0.006, 2000, 0.8181, 0.8970),
                       (32, 0.01, 2000, 0.8176, 0.8960), (16, 0.008, 2000, 0.8146, 0.8945),
                       (25, 0.01, 2000, 0.8136, 0.8920)],
    (8, "angle"): [(16, 0.008, 2000, 0.8437, 0.8940), (32, 0.01, 2000, 0.7372, 0.8945),
                   (25, 0.01, 2000, 0.7367, 0.8915), (25, 0.01, 2000, 0.7447, 0.8915),
                   (25, 0.009, 2000, 0.7849, 0.7990)],
}
_A_NOISY = {
    (4, "zz"): [(25, 0.01, 500, 0.5267, 0.8759), (10, 0.01, 500, 0.5541, 0.8320),
                (15, 0.008, 500, 0.5332, 0.8096), (20, 0.01, 500, 0.5307, 0.8764),
                (25, 0.01, 500, 0.4940, 0.7854)],
    (4, "amplitude"): [(10, 0.015, 500, 0.3739, 0.3844), (15, 0.0095, 500, 0.3111, 0.3241),
                       (20, 0.002, 500, 0.5101, 0.5101), (10, 0.01, 500, 0.4915, 0.4989),
                       (13, 0.003, 500, 0.4126, 0.4236)],
    (4, "angle"): [(25, 0.01, 500, 0.7719, 0.8999), (20, 0.004, 500, 0.8769, 0.8975),
                   (10, 0.05, 500, 0.6890, 0.7015), (13, 0.005, 500, 0.8342, 0.8352),
                   (25, 0.001, 500, 0.8261, 0.8334)],
    (8, "zz"): [(12, 0.009, 300, 0.5488, 0.9116), (20, 0.003, 300, 0.5352, 0.9025),
                (25, 0.005, 300, 0.5332, 0.9101), (20, 0.01, 300, 0.5402, 0.7206),
                (12, 0.007, 300, 0.5412, 0.6116)],
    (8, "amplitude"): [(10, 0.01, 300, 0.5236, 0.5302), (30, 0.004, 300, 0.5101, 0.5156),
                       (13, 0.004, 300, 0.5035, 0.5151), (15, 0.005, 300, 0.5121, 0.5317),
                       (12, 0.008, 300, 0.5070, 0.5111)],
    (8, "angle"): [(15, 0.009, 300, 0.8869, 0.9101), (20, 0.015, 300, 0.9020, 0.9065),
                   (13, 0.02, 300, 0.7367, 0.8126), (15, 0.007, 300, 0.6568, 0.7191),
                   (10, 0.008, 300, 0.6769, 0.7452)],
}
# PCA arm rows in ANSATZ_ORDER of (batch, lr, iterations, accuracy)
_C_NOISELESS = {
    (4, "zz"): [(25, 0.005, 2000, 0.6091), (32, 0.01, 2000, 0.5990), (16, 0.008, 2000, 0.5663),
                (25, 0.01, 2000, 0.4854), (32, 0.007, 2000, 0.5186)],
    (4, "amplitude"): [(25, 0.01, 2000, 0.5824), (16, 0.007, 2000, 0.5407), (25, 0.01, 2000, 0.5302),
                       (16, 0.009, 2000, 0.6096), (25, 0.006, 2000, 0.5387)],
    (4, "angle"): [(25, 0.01, 2000, 0.4854), (32, 0.005, 2000, 0.5799), (64, 0.01, 2000, 0.5895),
                   (16, 0.005, 2000, 0.5603), (25, 0.01, 2000, 0.4498)],
    (8, "zz"): [(25, 0.008, 2000, 0.5101), (16, 0.01, 2000, 0.5112), (25, 0.005, 2000, 0.5102),
                (25, 0.01, 2000, 0.5100), (32, 0.005, 2000, 0.5100)],
    (8, "angle"): [(25, 0.005, 2000, 0.4448), (16, 0.01, 2000, 0.4499), (32, 0.006, 2000, 0.4447),
                   (25, 0.01, 2000, 0.4787), (16, 0.005, 2000, 0.4498)],
}
_C_NOISY = {
    (4, "zz"): [(25, 0.01, 500, 0.5467), (20, 0.006, 500, 0.6211), (25, 0.009, 500, 0.5663),
                (30, 0.015, 500, 0.4603), (20, 0.01, 500, 0.5307)],
    (4, "amplitude"): [(15, 0.011, 500, 0.5277), (25, 0.005, 500, 0.5277), (20, 0.015, 500, 0.5312),
                       (15, 0.0085, 500, 0.5462), (25, 0.01, 500, 0.5246)],
    (4, "angle"): [(10, 0.01, 500, 0.6946), (23, 0.006, 500, 0.6945), (30, 0.02, 500, 0.5498),
                   (15, 0.007, 500, 0.5478), (10, 0.009, 500, 0.5211)],
    (8, "zz"): [(10, 0.01, 300, 0.5457), (21, 0.02, 300, 0.5503), (15, 0.007, 300, 0.5407),
                (12, 0.015, 300, 0.4673), (15, 0.01, 300, 0.5001)],
    (8, "angle"): [(13, 0.006, 300, 0.6382), (15, 0.009, 300, 0.6035), (20, 0.01, 300, 0.5347),
                   (10, 0.004, 300, 0.6257), (10, 0.01, 300, 0.5317)],
}

PARAMS_PER_BLOCK = {"TTN": 2, "U15": 4, "U13": 6, "U6": 10, "SU4": 15}
QCNN_LAYERS = {4: 2, 8: 3}


@dataclass(frozen=True)
class QCNNHyper:
    batch_size: int
    learning_rate: float
    iterations: int
    acc_published: float | None = None
    acc_published_untrained: float | None = None


@dataclass(frozen=True)
class ConditionSpec:
    """One row of the condition matrix, with both noise arms' hyperparameters."""
    arm: str            # "NQE" or "PCA"
    id: int
    n_qubits: int
    embedding: str
    ansatz: str
    noiseless: QCNNHyper
    noisy: QCNNHyper

    @property
    def label(self) -> str:
        return f"{self.arm}-{self.id}"

    @property
    def params_total(self) -> int:
        return QCNN_LAYERS[self.n_qubits] * PARAMS_PER_BLOCK[self.ansatz]

    def hyper(self, noise_arm: str) -> QCNNHyper:
        return {"noiseless": self.noiseless, "noisy": self.noisy}[noise_arm]


def _nqe_rows() -> list[ConditionSpec]:
    out, cid = [], 1
    for n in (4, 8):
        for emb in EMBEDDING_ORDER:
            for k, ans in enumerate(ANSATZ_ORDER):
                a = _A_NOISELESS[(n, emb)][k]
                b = _A_NOISY[(n, emb)][k]
                out.append(ConditionSpec("NQE", cid, n, emb, ans,
                                         QCNNHyper(a[0], a[1], a[2], a[4], a[3]),
                                         QCNNHyper(b[0], b[1], b[2], b[4], b[3])))
                cid += 1
    return out


def _pca_rows() -> list[ConditionSpec]:
    out, cid = [], 1
    for n, emb in [(4, "zz"), (4, "amplitude"), (4, "angle"), (8, "zz"), (8, "angle")]:
        for k, ans in enumerate(ANSATZ_ORDER):
            a = _C_NOISELESS[(n, emb)][k]
            b = _C_NOISY[(n, emb)][k]
            out.append(ConditionSpec("PCA", cid, n, emb, ans,
                                     QCNNHyper(a[0], a[1], a[2], a[3]),
                                     QCNNHyper(b[0], b[1], b[2], b[3])))
            cid += 1
    return out


CONDITIONS: tuple[ConditionSpec, ...] = tuple(_nqe_rows() + _pca_rows())


def condition(label: str) -> ConditionSpec:
    for c in CONDITIONS:
        if c.label == label:
            return c
    raise KeyError(f"unknown condition {label!r}")


# ---------------------------------------------------------------------------
# classical baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaselineSpec:
    table: str
    row: int
    n_qubits: int
    embedding: str
    ansatz: str
    layers: Layers | None        # None: the published table leaves the cell blank
    batch_size: int = 0
    learning_rate: float = 0.0
    iterations: int = 0
    declared_params: int | None = None
    acc_published: float | None = None
    note: str = ""
    printed_layers: Layers | None = field(default=None, compare=False)

    @property
    def skipped(self) -> bool:
        return self.layers is None

    @property
    def feature_source(self) -> str:
        return "nqe" if self.table.startswith("B") else "pca"


def _b(table, row, n, emb, ans, layers=None, hp=(0, 0.0, 0), count=None, acc=None, note="", printed=None):
    return BaselineSpec(table, row, n, emb, ans, layers, hp[0], hp[1], hp[2], count, acc, note, printed)


_nb = False
_bb = True
BASELINES: tuple[BaselineSpec, ...] = (
    # 4-qubit NQE counterparts
    _b("B.2", 1, 4, "zz", "SU4", ((8, 3, _nb), (3, 2, _nb)), (128, 0.0005, 50), 30, 0.8555),
    _b("B.2", 2, 4, "zz", "U6", ((8, 2, _nb), (2, 2, _nb)), (128, 0.005, 50), 20, 0.8317),
    _b("B.2", 3, 4, "zz", "U13", ((8, 1, _nb), (1, 2, _bb)), (128, 0.004, 50), 12, 0.8212),
    _b("B.2", 4, 4, "zz", "U15", ((8, 1, _nb),), (128, 0.003, 50), 8, 0.5000),
    _b("B.2", 5, 4, "zz", "TTN"),
    _b("B.2", 6, 4, "amplitude", "SU4", ((16, 2, _nb),), (128, 0.0005, 50), 32, 0.9033),
    _b("B.2", 7, 4, "amplitude", "U6", ((16, 1, _nb), (1, 2, _bb)), (128, 0.001, 50), 20, 0.8081,
       "printed head Linear(1, 1, bias) totals 18; widened to the 2-logit head to match the stated 20",
       ((16, 1, _nb), (1, 1, _bb))),
    _b("B.2", 8, 4, "amplitude", "U13", ((16, 1, _nb),), (128, 0.0005, 50), 16, 0.5000),
    _b("B.2", 9, 4, "amplitude", "U15"),
    _b("B.2", 10, 4, "amplitude", "TTN"),
    _b("B.2", 11, 4, "angle", "SU4", ((4, 4, _bb), (4, 2, _bb)), (128, 0.003, 50), 30, 0.6007),
    _b("B.2", 12, 4, "angle", "U6", ((4, 3, _nb), (3, 2, _bb)), (128, 0.005, 50), 20, 0.5967),
    _b("B.2", 13, 4, "angle", "U13", ((4, 2, _nb), (2, 2, _nb)), (128, 0.01, 50), 12, 0.5569),
    _b("B.2", 14, 4, "angle", "U15"),
    _b("B.2", 15, 4, "angle", "TTN"),
    # 8-qubit NQE counterparts
    _b("B.3", 1, 8, "zz", "SU4", ((16, 2, _bb), (2, 4, _nb), (4, 2, _nb)), (128, 0.03, 50), 50, 0.8544,
       "printed 16-2-3-2 stack totals 48 and no bias-flag edit reaches 50; hidden width 4 "
       "with an unbiased head is the nearest stack with the stated count",
       ((16, 2, _bb), (2, 3, _nb), (3, 2, _bb))),
    _b("B.3", 2, 8, "zz", "U6", ((16, 2, _nb),), (16, 0.001, 50), 32, 0.9315),
    _b("B.3", 3, 8, "zz", "U13", ((16, 1, _nb), (1, 2, _nb)), (16, 0.003, 50), 18, 0.6776),
    _b("B.3", 4, 8, "zz", "U15"),
    _b("B.3", 5, 8, "zz", "TTN"),
    _b("B.3", 6, 8, "angle", "SU4", ((8, 4, _bb), (4, 2, _bb)), (16, 0.001, 50), 46, 0.8493),
    _b("B.3", 7, 8, "angle", "U6", ((8, 3, _nb), (3, 2, _nb)), (16, 0.001, 50), 30, 0.8484),
    _b("B.3", 8, 8, "angle", "U13", ((8, 2, _bb),), (16, 0.003, 50), 18, 0.8489),
    _b("B.3", 9, 8, "angle", "U15", ((8, 1, _nb), (1, 2, _bb)), (16, 0.003, 50), 12, 0.7647),
    _b("B.3", 10, 8, "angle", "TTN"),
    # 4-qubit PCA counterparts
    _b("C.5", 1, 4, "zz", "SU4", ((8, 3, _nb), (3, 2, _nb)), (16, 0.003, 50), 30, 0.7512),
    _b("C.5", 2, 4, "zz", "U6", ((8, 2, _nb), (2, 2, _nb)), (32, 0.001, 50), 20, 0.7437),
    _b("C.5", 3, 4, "zz", "U13", ((8, 1, _nb), (1, 2, _bb)), (16, 0.005, 50), 12, 0.7416),
    _b("C.5", 4, 4, "zz", "U15", ((8, 1, _nb),), (16, 0.01, 50), 8, 0.5000),
    _b("C.5", 5, 4, "zz", "TTN"),
    _b("C.5", 6, 4, "amplitude", "SU4", ((16, 2, _nb),), (16, 0.005, 50), 32, 0.7472),
    _b("C.5", 7, 4, "amplitude", "U6"),
    _b("C.5", 8, 4, "amplitude", "U13"),
    _b("C.5", 9, 4, "amplitude", "U15"),
    _b("C.5", 10, 4, "amplitude", "TTN"),
    _b("C.5", 11, 4, "angle", "SU4", ((4, 4, _bb), (4, 2, _bb)), (16, 0.003, 50), 30, 0.7140),
    _b("C.5", 12, 4, "angle", "U6", ((4, 3, _nb), (3, 2, _bb)), (16, 0.001, 50), 20, 0.7049),
    _b("C.5", 13, 4, "angle", "U13", ((4, 2, _nb), (2, 2, _nb)), (16, 0.005, 50), 12, 0.6667),
    _b("C.5", 14, 4, "angle", "U15", ((4, 2, _nb),), (16, 0.003, 50), 8, 0.6793),
    _b("C.5", 15, 4, "angle", "TTN", ((4, 1, _nb),), (16, 0.008, 50), 4, 0.5000),
    # 8-qubit PCA counterparts (row numbers as printed)
    _b("C.6", 1, 8, "zz", "SU4", ((16, 2, _bb), (2, 2, _bb), (2, 2, _bb)), (16, 0.001, 50), 46, 0.6862),
    _b("C.6", 2, 8, "zz", "U6", ((16, 2, _nb),), (16, 0.003, 50), 32, 0.7507),
    _b("C.6", 3, 8, "zz", "U13"),
    _b("C.6", 4, 8, "zz", "U15"),
    _b("C.6", 5, 8, "zz", "TTN"),
    _b("C.6", 11, 8, "angle", "SU4", ((8, 4, _bb), (4, 1, _bb), (1, 2, _bb)), (16, 0.005, 50), 45, 0.6370),
    _b("C.6", 12, 8, "angle", "U6", ((8, 3, _nb), (3, 2, _nb)), (16, 0.003, 50), 30, 0.7523),
    _b("C.6", 13, 8, "angle", "U13", ((8, 2, _bb),), (16, 0.001, 50), 18, 0.7532),
    _b("C.6", 14, 8, "angle", "U15", ((8, 1, _nb), (1, 2, _bb)), (16, 0.001, 50), 12, 0.7407),
    _b("C.6", 15, 8, "angle", "TTN"),
)


def count_layers(layers: Layers | None) -> int:
    if not layers:
        return 0
    return sum(i * o + (o if b else 0) for i, o, b in layers)


def baseline(table: str, row: int) -> BaselineSpec:
    for b in BASELINES:
        if b.table == table and b.row == row:
            return b
    raise KeyError(f"no baseline {table}#{row}")
