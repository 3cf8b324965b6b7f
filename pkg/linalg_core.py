"""
Полилинейные примитивы CPPREDICTOR

Произведения Адамара и Хатри-Рао, внешнее произведение векторов и
плотный тензор для оракула.

Соглашение об упорядочивании (одно на весь проект): матрицы хранятся
построчно (numpy, C-порядок), тензор линеаризуется обратно-лексикографически,
т.е. первый индекс меняется быстрее всех (numpy order='F').
"""

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Tuple

import numpy as np

import config
from error_handler import CapacityError, DimensionError, NumericRangeError


Matrix = np.ndarray
Vector = np.ndarray


# ========================================================================
# ПРОВЕРКИ
# ========================================================================

def as_matrix(value, name: str = "matrix") -> Matrix:
    """
    Приводит значение к двумерному массиву float64 с конечными элементами

    Args:
        value: Массив или вложенный список
        name: Имя для сообщения об ошибке

    Returns:
        Matrix: Массив формы (rows, cols)
    """
    matrix = np.asarray(value, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError(f"{name}: ожидается матрица, получен массив размерности {matrix.ndim}")
    if not np.all(np.isfinite(matrix)):
        raise NumericRangeError(f"{name}: матрица содержит нечисловые значения")
    return matrix


def check_capacity(dims: Sequence[int], capacity: int = None) -> int:
    """
    Проверяет, что тензор с такими размерами помещается в бюджет памяти

    Args:
        dims: Размеры мод
        capacity: Предел числа элементов (по умолчанию из config)

    Returns:
        int: Число элементов

    Raises:
        CapacityError: Если предел превышен
    """
    capacity = config.DENSE_TENSOR_CAPACITY if capacity is None else capacity
    size = math.prod(int(d) for d in dims)
    if size > capacity:
        raise CapacityError(
            f"тензор размеров {tuple(dims)} содержит {size} элементов, предел {capacity}"
        )
    return size


# ========================================================================
# ПЛОТНЫЙ ТЕНЗОР
# ========================================================================

@dataclass(frozen=True)
class DenseTensor:
    """Плотный тензор с линеаризацией 'первый индекс быстрее'"""
    dims: Tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        if len(self.dims) < 1:
            raise DimensionError("тензор должен иметь хотя бы одну моду")
        if self.data.ndim != 1 or self.data.size != math.prod(self.dims):
            raise DimensionError(
                f"длина данных {self.data.size} не равна произведению размеров {self.dims}"
            )

    @classmethod
    def from_array(cls, array: np.ndarray) -> "DenseTensor":
        """Строит тензор из многомерного numpy-массива (индексы как у массива)"""
        array = np.asarray(array, dtype=np.float64)
        check_capacity(array.shape)
        return cls(dims=tuple(int(d) for d in array.shape), data=array.ravel(order='F'))

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        check_capacity(dims)
        return cls(dims=tuple(int(d) for d in dims), data=np.zeros(math.prod(dims)))

    @property
    def order(self) -> int:
        return len(self.dims)

    def as_array(self) -> np.ndarray:
        """Многомерное представление: as_array()[i_1, ..., i_N]"""
        return self.data.reshape(self.dims, order='F')

    def entry(self, index: Sequence[int]) -> float:
        return float(self.as_array()[tuple(index)])

    def matricize(self, mode: int) -> Matrix:
        """Развёртка по моде mode (остальные индексы упорядочены 'первый быстрее')"""
        array = np.moveaxis(self.as_array(), mode, 0)
        return array.reshape(self.dims[mode], -1, order='F')

    def inner(self, other: "DenseTensor") -> float:
        """Скалярное произведение тензоров одинаковых размеров"""
        if self.dims != other.dims:
            raise DimensionError(f"размеры тензоров не совпадают: {self.dims} и {other.dims}")
        return float(np.dot(self.data, other.data))

    def hadamard(self, other: "DenseTensor") -> "DenseTensor":
        if self.dims != other.dims:
            raise DimensionError(f"размеры тензоров не совпадают: {self.dims} и {other.dims}")
        return DenseTensor(dims=self.dims, data=self.data * other.data)


# ========================================================================
# ПРОИЗВЕДЕНИЯ
# ========================================================================

def hadamard(a: Matrix, b: Matrix) -> Matrix:
    """
    Поэлементное произведение матриц одинаковой формы

    Raises:
        DimensionError: Если формы различаются
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"произведение Адамара: формы {a.shape} и {b.shape} различаются")
    return np.multiply(a, b)


def hadamard_chain(matrices: Sequence[Matrix]) -> Matrix:
    """Произведение Адамара списка матриц одинаковой формы"""
    if not matrices:
        raise DimensionError("произведение Адамара пустого списка не определено")
    return reduce(hadamard, matrices)


def khatri_rao(a: Matrix, b: Matrix) -> Matrix:
    """
    Произведение Хатри-Рао: столбец r равен kron(a[:, r], b[:, r])

    Args:
        a: Матрица (I, R)
        b: Матрица (J, R)

    Returns:
        Matrix: Матрица (I*J, R)
    """
    a = as_matrix(a, "khatri_rao.a")
    b = as_matrix(b, "khatri_rao.b")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"произведение Хатри-Рао: число столбцов {a.shape[1]} и {b.shape[1]} различается"
        )
    rows_a, rank = a.shape
    rows_b = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(rows_a * rows_b, rank)


def khatri_rao_chain(matrices: Sequence[Matrix]) -> Matrix:
    """Произведение Хатри-Рао списка матриц слева направо"""
    if not matrices:
        raise DimensionError("произведение Хатри-Рао пустого списка не определено")
    return reduce(khatri_rao, matrices)


def outer_product_chain(vectors: Sequence[Vector]) -> DenseTensor:
    """
    Внешнее произведение векторов: элемент (i_1, ..., i_N) = prod_k v_k[i_k]

    Raises:
        DimensionError: Пустой список
        CapacityError: Результат больше предела DENSE_TENSOR_CAPACITY
    """
    if len(vectors) == 0:
        raise DimensionError("внешнее произведение требует хотя бы один вектор")
    vectors = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    check_capacity([v.size for v in vectors])
    array = reduce(np.multiply.outer, vectors)
    return DenseTensor.from_array(np.asarray(array))
