"""
Tipo de tensor denso (ndarray float32), RNG determinístico, primitivas
neurais (matmul, layernorm, GELU) e o formato binário SPTN.
"""
import contextvars
import logging
import math
import struct

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import numpy.typing as npt

from scipy.special import erf

from .errors import (
	ArquivoError,
	BadDtypeError,
	BadMagicError,
	BadVersionError,
	ConfigError,
	NonFiniteError,
	ShapeError,
	TensorFormatError,
	TruncatedError,
)

logger = logging.getLogger(__name__)

Tensor = npt.NDArray[np.float32]

MAGIC = b"SPTN"
VERSAO = 1
DTYPE_F32 = 0
CABECALHO = struct.Struct("<4sBBB3s")
DIMENSAO = struct.Struct("<Q")

LAYERNORM_EPS = 1e-6


def as_tensor(x, *, nome: str = "tensor") -> Tensor:
	"""
	Converte para ndarray float32 C-contíguo e valida as extensões e a finitude.
	"""
	t = np.ascontiguousarray(x, dtype=np.float32)
	if t.ndim == 0:
		t = t.reshape(1)

	if any(extensao < 1 for extensao in t.shape):
		raise ShapeError(f"{nome}: extensões devem ser positivas, recebido {t.shape}")

	check_finite(t, nome=nome)
	return t


def check_finite(t: np.ndarray, *, nome: str = "tensor") -> np.ndarray:
	if not np.all(np.isfinite(t)):
		raise NonFiniteError(f"{nome}: contém NaN ou Inf")
	return t


def max_rel_error(obtido: np.ndarray, esperado: np.ndarray) -> float:
	"""Erro relativo máximo: max|a - b| / max(max|b|, 1e-30)."""
	obtido = np.asarray(obtido, dtype=np.float64)
	esperado = np.asarray(esperado, dtype=np.float64)
	if obtido.shape != esperado.shape:
		raise ShapeError(f"formas diferentes: {obtido.shape} vs {esperado.shape}")

	escala = max(float(np.max(np.abs(esperado))), 1e-30)
	return float(np.max(np.abs(obtido - esperado))) / escala


class Rng:
	"""
	Gerador determinístico baseado em contador (Philox 4x64 do numpy).
	A mesma semente produz a mesma sequência em qualquer plataforma.
	"""

	def __init__(self, seed: int = 0):
		if not 0 <= int(seed) < 2**64:
			raise ConfigError(f"seed fora de u64: {seed}")
		self.seed = int(seed)
		self._gen = np.random.Generator(np.random.Philox(self.seed))

	@property
	def generator(self) -> np.random.Generator:
		return self._gen

	def normal(self, shape: Sequence[int], scale: float = 1.0) -> Tensor:
		return (self._gen.standard_normal(tuple(shape)) * scale).astype(np.float32)

	def uniform(self, shape: Sequence[int], low: float = 0.0, high: float = 1.0) -> Tensor:
		return self._gen.uniform(low, high, tuple(shape)).astype(np.float32)

	def integers(self, low: int, high: int, size=None):
		return self._gen.integers(low, high, size=size)

	def permutation(self, n: int) -> np.ndarray:
		return self._gen.permutation(n)

	def choice(self, n: int, p: np.ndarray | None = None) -> int:
		return int(self._gen.choice(n, p=p))

	def spawn(self, salto: int) -> "Rng":
		return Rng((self.seed * 1_000_003 + salto) % 2**64)


@dataclass
class ContadorOperacoes:
	chamadas: int = 0
	macs: int = 0

	def registrar(self, m: int, k: int, n: int):
		self.chamadas += 1
		self.macs += m * k * n


_contadores: contextvars.ContextVar[tuple[ContadorOperacoes, ...]] = contextvars.ContextVar(
	"contadores_listra", default=()
)


@contextmanager
def contar_operacoes() -> Iterator[ContadorOperacoes]:
	"""Conta chamadas de matmul e multiplicações-acumulações dentro do bloco."""
	contador = ContadorOperacoes()
	token = _contadores.set(_contadores.get() + (contador,))
	try:
		yield contador
	finally:
		_contadores.reset(token)


def _produto(a: np.ndarray, b: np.ndarray) -> Tensor:
	m, k = a.shape
	n = b.shape[1]
	c = np.zeros((m, n), dtype=np.float32)

	# ordem fixa: p crescente, acumulação em f32; cada linha de c só depende da linha de a
	for p in range(k):
		c += np.multiply.outer(a[:, p], b[p])

	for contador in _contadores.get():
		contador.registrar(m, k, n)

	return c


def matmul(a, b) -> Tensor:
	a = as_tensor(a, nome="a")
	b = as_tensor(b, nome="b")

	if a.ndim != 2 or b.ndim != 2:
		raise ShapeError(f"matmul espera matrizes, recebido {a.shape} e {b.shape}")

	if a.shape[1] != b.shape[0]:
		raise ShapeError(f"extensões internas diferentes: {a.shape} x {b.shape}")

	return check_finite(_produto(a, b), nome="matmul")


def _soma_colunas(x: np.ndarray) -> np.ndarray:
	s = x[:, 0].copy()
	for p in range(1, x.shape[1]):
		s += x[:, p]
	return s


def layernorm(x, gamma, beta, eps: float = LAYERNORM_EPS) -> Tensor:
	x = as_tensor(x, nome="x")
	gamma = as_tensor(gamma, nome="gamma")
	beta = as_tensor(beta, nome="beta")

	if x.ndim != 2:
		raise ShapeError(f"layernorm espera N×d, recebido {x.shape}")

	d = x.shape[1]
	if gamma.shape != (d,) or beta.shape != (d,):
		raise ShapeError(f"gamma/beta devem ter forma ({d},), recebido {gamma.shape} e {beta.shape}")

	if eps < 0:
		raise ConfigError(f"eps deve ser não negativo, recebido {eps}")

	media = _soma_colunas(x) / np.float32(d)
	centrado = x - media[:, None]
	variancia = _soma_colunas(centrado * centrado) / np.float32(d)
	with np.errstate(divide="ignore", invalid="ignore"):
		y = centrado / np.sqrt(variancia + np.float32(eps))[:, None] * gamma + beta

	return check_finite(y.astype(np.float32, copy=False), nome="layernorm")


def gelu(x) -> Tensor:
	x = as_tensor(x, nome="x")
	x64 = x.astype(np.float64)
	y = 0.5 * x64 * (1.0 + erf(x64 / math.sqrt(2.0)))
	return y.astype(np.float32)


def tensor_write(t, path: str):
	t = as_tensor(t)
	if t.ndim > 255:
		raise ShapeError(f"rank {t.ndim} não cabe em um byte")

	cabecalho = CABECALHO.pack(MAGIC, VERSAO, DTYPE_F32, t.ndim, b"\x00\x00\x00")
	dims = b"".join(DIMENSAO.pack(extensao) for extensao in t.shape)

	try:
		with open(path, "wb") as f:
			f.write(cabecalho)
			f.write(dims)
			f.write(t.astype("<f4", copy=False).tobytes(order="C"))
	except OSError as e:
		raise ArquivoError(str(path), f"falha ao escrever tensor ({e.strerror or e})") from e

	logger.debug("tensor %s gravado em %s", t.shape, path)


def tensor_read(path: str) -> Tensor:
	try:
		with open(path, "rb") as f:
			conteudo = f.read()
	except FileNotFoundError as e:
		raise ArquivoError(str(path), "arquivo não encontrado") from e
	except OSError as e:
		raise ArquivoError(str(path), f"falha ao ler tensor ({e.strerror or e})") from e

	if len(conteudo) < CABECALHO.size:
		if not MAGIC.startswith(conteudo[:4]):
			raise BadMagicError(str(path), f"magic inválido {conteudo[:4]!r}")
		raise TruncatedError(str(path), "cabeçalho incompleto")

	magic, versao, dtype, rank, reservado = CABECALHO.unpack_from(conteudo, 0)

	if magic != MAGIC:
		raise BadMagicError(str(path), f"magic inválido {magic!r}")

	if versao != VERSAO:
		raise BadVersionError(str(path), f"versão {versao} não suportada")

	if dtype != DTYPE_F32:
		raise BadDtypeError(str(path), f"dtype {dtype} não suportado")

	if reservado != b"\x00\x00\x00":
		raise TensorFormatError(str(path), "bytes reservados não nulos")

	inicio = CABECALHO.size
	fim_dims = inicio + rank * DIMENSAO.size
	if len(conteudo) < fim_dims:
		raise TruncatedError(str(path), "dimensões incompletas")

	shape = tuple(
		DIMENSAO.unpack_from(conteudo, inicio + i * DIMENSAO.size)[0] for i in range(rank)
	)
	if rank == 0 or 0 in shape:
		raise TensorFormatError(str(path), f"dimensões inválidas {shape}")

	# produto em int: extensões u64 grandes não transbordam
	tamanho = math.prod(shape) * 4

	payload = conteudo[fim_dims:]
	if len(payload) < tamanho:
		raise TruncatedError(str(path), f"payload com {len(payload)} bytes, esperado {tamanho}")

	if len(payload) > tamanho:
		raise TensorFormatError(str(path), f"{len(payload) - tamanho} bytes sobrando após o payload")

	t = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)
	return as_tensor(t, nome=str(path))
