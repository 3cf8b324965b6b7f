"""
Штрафы на факторные матрицы CP-модели

Порядковая регуляризация α<B⊛W, B⊛W> считается без материализации W:

    P = α 1^T (⊛_k Y_k^T Y_k) 1,   Y_k = A^(k) ⊛ b_k

и обычный L2-штраф α Σ ||A^(n)||_F^2.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from cp_model import CpModel
from error_handler import ConfigurationException, DimensionError, UsageException
from feature_maps import FeatureMapSpec
from linalg_core import Matrix, Vector
from types_models import MapKind, RegularizerKind, parse_enum


FactorsLike = Union[CpModel, Sequence[np.ndarray]]


@dataclass(frozen=True)
class RegularizerSpec:
    """Тип штрафа, сила α и основание β (только для порядковой регуляризации)"""
    kind: RegularizerKind = RegularizerKind.NONE
    alpha: float = 0.0
    beta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_enum(RegularizerKind, self.kind))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ConfigurationException(f"сила регуляризации alpha должна быть >= 0, получено {self.alpha}")
        if self.kind is RegularizerKind.ORDER:
            if self.beta is None or not float(self.beta) > 1.0:
                raise ConfigurationException(f"порядковая регуляризация требует beta > 1, получено {self.beta}")
            object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def none(cls) -> "RegularizerSpec":
        return cls(RegularizerKind.NONE)

    @classmethod
    def l2(cls, alpha: float) -> "RegularizerSpec":
        return cls(RegularizerKind.L2, alpha)

    @classmethod
    def order(cls, alpha: float, beta: float) -> "RegularizerSpec":
        return cls(RegularizerKind.ORDER, alpha, beta)


# ========================================================================
# ВЕКТОРЫ b
# ========================================================================

def build_b_vector(spec: RegularizerSpec, map_spec: FeatureMapSpec, mode: int) -> Vector:
    """
    Вектор весов b для моды mode

    Полиномиальные отображения: [1, β, β^2, ..., β^(d-1)] - старшие степени
    штрафуются сильнее. Категориальное: [1, β, ..., β] длины K_n + 1.

    Raises:
        UsageException: Спецификация не порядковая
    """
    if spec.kind is not RegularizerKind.ORDER:
        raise UsageException(f"вектор b определён только для порядковой регуляризации, получено {spec.kind.value}")
    d = map_spec.local_dims[mode]
    if map_spec.kind is MapKind.CATEGORICAL:
        b = np.full(d, spec.beta)
        b[0] = 1.0
        return b
    return np.power(spec.beta, np.arange(d, dtype=np.float64))


def build_b_vectors(spec: RegularizerSpec, map_spec: FeatureMapSpec) -> List[Vector]:
    return [build_b_vector(spec, map_spec, mode) for mode in range(map_spec.n_features)]


def _factor_list(model: FactorsLike) -> Sequence[np.ndarray]:
    return model.factors if isinstance(model, CpModel) else model


def _resolve_b_vectors(model: FactorsLike, spec: RegularizerSpec,
                       b_vectors: Optional[Sequence[Vector]]) -> Sequence[Vector]:
    factors = _factor_list(model)
    if b_vectors is None:
        if not isinstance(model, CpModel):
            raise UsageException("для списка факторов векторы b нужно передать явно")
        b_vectors = build_b_vectors(spec, model.map_spec)
    if len(b_vectors) != len(factors):
        raise DimensionError(f"число векторов b {len(b_vectors)} не равно числу факторов {len(factors)}")
    for mode, (b, factor) in enumerate(zip(b_vectors, factors)):
        if np.shape(b) != (factor.shape[0],):
            raise DimensionError(
                f"мода {mode}: длина b {np.shape(b)} не совпадает с числом строк фактора {factor.shape[0]}"
            )
    return b_vectors


def _excluded_hadamard(grams: List[Matrix]) -> List[Matrix]:
    """Для каждого n: ⊛_{k≠n} G_k через префиксные и суффиксные произведения"""
    count = len(grams)
    left = [np.ones_like(grams[0])]
    for gram in grams[:-1]:
        left.append(left[-1] * gram)
    right = [np.ones_like(grams[0])] * count
    for n in range(count - 2, -1, -1):
        right[n] = right[n + 1] * grams[n + 1]
    return [l * r for l, r in zip(left, right)]


# ========================================================================
# ПОРЯДКОВАЯ РЕГУЛЯРИЗАЦИЯ
# ========================================================================

def order_penalty(model: FactorsLike, spec: RegularizerSpec,
                  b_vectors: Optional[Sequence[Vector]] = None) -> float:
    """
    Штраф α <B⊛W, B⊛W> за O(N R^2 d)

    Args:
        model: CP-модель или список факторов
        spec: Спецификация регуляризации (используется alpha)
        b_vectors: Явные векторы b (по умолчанию строятся из spec.beta)

    Returns:
        float: Неотрицательное значение штрафа

    Raises:
        DimensionError: Длины b не совпадают с факторами
    """
    if spec.alpha == 0.0:
        return 0.0
    factors = _factor_list(model)
    b_vectors = _resolve_b_vectors(model, spec, b_vectors)
    grams = []
    for factor, b in zip(factors, b_vectors):
        weighted = factor * np.asarray(b)[:, None]
        grams.append(weighted.T @ weighted)
    product = grams[0]
    for gram in grams[1:]:
        product = product * gram
    return float(spec.alpha * np.sum(product))


def order_penalty_gradient(model: FactorsLike, spec: RegularizerSpec,
                           b_vectors: Optional[Sequence[Vector]] = None) -> List[Matrix]:
    """
    Градиент порядкового штрафа по каждому фактору

        ∂P/∂A^(n) = 2α b_n ⊛ (Y_n (⊛_{k≠n} Y_k^T Y_k))
    """
    factors = _factor_list(model)
    if spec.alpha == 0.0:
        return [np.zeros_like(factor) for factor in factors]
    b_vectors = _resolve_b_vectors(model, spec, b_vectors)
    weighted = [factor * np.asarray(b)[:, None] for factor, b in zip(factors, b_vectors)]
    grams = [y.T @ y for y in weighted]
    others = _excluded_hadamard(grams)
    return [
        2.0 * spec.alpha * np.asarray(b)[:, None] * (y @ rest)
        for b, y, rest in zip(b_vectors, weighted, others)
    ]


# ========================================================================
# L2
# ========================================================================

def l2_penalty(model: FactorsLike, alpha: float) -> float:
    """α Σ_n ||A^(n)||_F^2"""
    if alpha < 0:
        raise ConfigurationException(f"alpha должна быть >= 0, получено {alpha}")
    return float(alpha * sum(np.sum(factor * factor) for factor in _factor_list(model)))


def l2_gradient(model: FactorsLike, alpha: float) -> List[Matrix]:
    if alpha < 0:
        raise ConfigurationException(f"alpha должна быть >= 0, получено {alpha}")
    return [2.0 * alpha * factor for factor in _factor_list(model)]


# ========================================================================
# ДИСПЕТЧЕРЫ
# ========================================================================

def penalty(model: FactorsLike, spec: RegularizerSpec,
            b_vectors: Optional[Sequence[Vector]] = None) -> float:
    """Значение штрафа выбранного типа (0 для none)"""
    if spec.kind is RegularizerKind.ORDER:
        return order_penalty(model, spec, b_vectors)
    if spec.kind is RegularizerKind.L2:
        return l2_penalty(model, spec.alpha)
    return 0.0


def penalty_gradient(model: FactorsLike, spec: RegularizerSpec,
                     b_vectors: Optional[Sequence[Vector]] = None) -> Optional[List[Matrix]]:
    """Градиент штрафа выбранного типа; None если штрафа нет"""
    if spec.kind is RegularizerKind.ORDER:
        return order_penalty_gradient(model, spec, b_vectors)
    if spec.kind is RegularizerKind.L2:
        return l2_gradient(model, spec.alpha)
    return None


# ========================================================================
# ТОЖДЕСТВО ДЛЯ СЛЕДА
# ========================================================================

def hadamard_trace_form(x: Matrix, w: Matrix, z: Matrix) -> float:
    """Tr((X⊛W) Z (X⊛W)^T)"""
    y = np.asarray(x) * np.asarray(w)
    return float(np.trace(y @ np.asarray(z) @ y.T))


def hadamard_trace_gradient(x: Matrix, w: Matrix, z: Matrix) -> Matrix:
    """
    Производная Tr((X⊛W) Z (X⊛W)^T) по W: X ⊛ ((X⊛W)(Z + Z^T))

    На этом тождестве построен градиент порядкового штрафа.
    """
    x = np.asarray(x)
    z = np.asarray(z)
    return x * ((x * np.asarray(w)) @ (z + z.T))
