"""
Эталонные вычисления на материализованном тензоре весов

Медленные, но прямые реализации предсказания, порядкового штрафа и
градиентов (центральные разности). Используются только для проверки
быстрых алгоритмов на небольших размерах (не более DENSE_TENSOR_CAPACITY
элементов).
"""

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from cp_model import CpModel
from error_handler import ConfigurationException, InputError, NumericRangeError
from feature_maps import check_row, map_feature_row
from linalg_core import DenseTensor, Matrix, Vector, check_capacity, outer_product_chain


@dataclass(frozen=True)
class MaterializedModel:
    """Полный тензор W = Σ_r a_r^(1) ∘ ... ∘ a_r^(N) и исходная модель"""
    weight_tensor: DenseTensor
    source: CpModel


def materialize(model: CpModel) -> MaterializedModel:
    """
    Материализует весовой тензор CP-модели

    Raises:
        CapacityError: Π d_n больше DENSE_TENSOR_CAPACITY
    """
    dims = [factor.shape[0] for factor in model.factors]
    check_capacity(dims)
    total = np.zeros(dims)
    for r in range(model.rank):
        total = total + outer_product_chain([factor[:, r] for factor in model.factors]).as_array()
    return MaterializedModel(weight_tensor=DenseTensor.from_array(total), source=model)


def feature_tensor(model: CpModel, x) -> DenseTensor:
    """Φ(x) = φ(x_1) ∘ ... ∘ φ(x_N)"""
    return outer_product_chain(map_feature_row(check_row(x, model.map_spec), model.map_spec))


def predict_oracle(mat: MaterializedModel, x) -> float:
    """<Φ(x), W> полным скалярным произведением"""
    return mat.weight_tensor.inner(feature_tensor(mat.source, x))


def order_penalty_oracle(mat: MaterializedModel, b_vectors: Sequence[Vector], alpha: float) -> float:
    """α <B⊛W, B⊛W>, где B = b_1 ∘ ... ∘ b_N"""
    if len(b_vectors) != mat.weight_tensor.order:
        raise InputError(f"ожидается {mat.weight_tensor.order} векторов b, получено {len(b_vectors)}")
    weighted = outer_product_chain(b_vectors).hadamard(mat.weight_tensor)
    return float(alpha) * weighted.inner(weighted)


def finite_difference(f: Callable[[CpModel], float], model: CpModel,
                      step: float = 1e-6) -> List[Matrix]:
    """
    Градиент скалярной функции модели центральными разностями

    Для параметра θ шаг равен step * max(1, |θ|).

    Args:
        f: Функция модели, возвращающая число
        model: Точка дифференцирования
        step: Относительный шаг (> 0)

    Returns:
        List[Matrix]: Оценки частных производных по каждому фактору

    Raises:
        NumericRangeError: f вернула нечисловое значение
    """
    if not step > 0:
        raise ConfigurationException(f"шаг конечных разностей должен быть > 0, получено {step}")

    factors = model.writable_factors()
    grads = [np.zeros_like(factor) for factor in factors]

    def evaluate(values: List[np.ndarray]) -> float:
        value = float(f(model.with_factors(values)))
        if not np.isfinite(value):
            raise NumericRangeError("функция вернула нечисловое значение при конечных разностях")
        return value

    for n, factor in enumerate(factors):
        for index in np.ndindex(*factor.shape):
            theta = factor[index]
            h = step * max(1.0, abs(theta))
            factor[index] = theta + h
            upper = evaluate(factors)
            factor[index] = theta - h
            lower = evaluate(factors)
            factor[index] = theta
            grads[n][index] = (upper - lower) / (2.0 * h)
    return grads


def scalar_finite_difference(f: Callable[[float], float], theta: float, step: float = 1e-6) -> float:
    """Центральная разность для функции одного аргумента"""
    h = step * max(1.0, abs(theta))
    return (f(theta + h) - f(theta - h)) / (2.0 * h)
