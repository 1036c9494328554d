import csv
import os

from enum import Enum
from typing import Iterable, Mapping, Sequence, TypedDict

import numpy as np

from .errors import ArquivoError, ConfigError


RAIZ = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class DataFiles(Enum):
	CONFIG = 'data/encoder.cfg'
	CONFIG_TESTE = 'data/teste.cfg'

	@property
	def caminho(self) -> str:
		return os.path.join(RAIZ, self.value)


class BenchRow(TypedDict):
	density: float
	achieved_density: float
	median_ms: float
	speedup: float


class CostRow(TypedDict):
	block: int
	kind: str
	tile_pairs: int
	tile_pairs_total: int
	attention_density: float
	mlp_rows: int
	mlp_rows_total: int
	mlp_density: float
	wall_ms: float


class StatsRow(TypedDict):
	layer: int
	K: int
	rho: float
	mean_u_keep: float
	mean_u_bypass: float
	drift: float


class ProbeRow(TypedDict):
	k: int
	distortion: float
	perturbation: float


BENCH_COLUNAS = ["density", "achieved_density", "median_ms", "speedup"]
CUSTO_COLUNAS = list(CostRow.__annotations__)
STATS_COLUNAS = list(StatsRow.__annotations__)
PROBE_COLUNAS = list(ProbeRow.__annotations__)


def abrir_config(arquivo: str) -> dict[str, str]:
	"""
	Lê um arquivo de configuração plano `chave=valor`.
	Linhas vazias e comentários (#) são ignorados; chaves repetidas são erro.
	"""
	if not os.path.isfile(arquivo):
		raise ArquivoError(arquivo, "arquivo de configuração não encontrado")

	config: dict[str, str] = {}
	with open(arquivo, "r", encoding="utf-8") as f:
		for numero, linha in enumerate(f, start=1):
			linha = linha.split("#", 1)[0].strip()
			if not linha:
				continue

			if "=" not in linha:
				raise ConfigError(f"{arquivo}:{numero}: esperado chave=valor, recebido {linha!r}")

			chave, valor = (parte.strip() for parte in linha.split("=", 1))
			if chave in config:
				raise ConfigError(f"{arquivo}:{numero}: chave {chave!r} repetida")

			config[chave] = valor

	return config


def _formatar(valor) -> str:
	if isinstance(valor, float | np.floating):
		return repr(float(valor))
	return str(valor)


def salvar_csv(arquivo: str, colunas: Sequence[str], linhas: Iterable[Mapping[str, object]]):
	_criar_pasta(arquivo)
	try:
		with open(arquivo, "w", encoding="utf-8", newline="") as f:
			writer = csv.writer(f, lineterminator="\n")
			writer.writerow(colunas)
			for linha in linhas:
				writer.writerow([_formatar(linha[c]) for c in colunas])
	except OSError as e:
		raise ArquivoError(arquivo, f"falha ao escrever CSV ({e.strerror or e})") from e


def abrir_csv(arquivo: str) -> list[dict[str, str]]:
	with open(arquivo, "r", encoding="utf-8", newline="") as f:
		return list(csv.DictReader(f))


def salvar_pgm(arquivo: str, imagem: np.ndarray):
	"""Grava um P5 (PGM binário, 8 bits) com normalização min-max para 0-255."""
	imagem = np.asarray(imagem, dtype=np.float64)
	if imagem.ndim != 2:
		raise ConfigError(f"PGM precisa de uma imagem 2D, recebido {imagem.shape}")

	minimo, maximo = float(imagem.min()), float(imagem.max())
	if maximo > minimo:
		cinza = np.rint((imagem - minimo) / (maximo - minimo) * 255.0)
	else:
		cinza = np.zeros_like(imagem)

	h, w = imagem.shape
	_criar_pasta(arquivo)
	try:
		with open(arquivo, "wb") as f:
			f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
			f.write(cinza.astype(np.uint8).tobytes())
	except OSError as e:
		raise ArquivoError(arquivo, f"falha ao escrever PGM ({e.strerror or e})") from e


def abrir_pgm(arquivo: str) -> np.ndarray:
	with open(arquivo, "rb") as f:
		conteudo = f.read()

	# só o cabeçalho gravado por salvar_pgm: três linhas e depois os bytes
	partes = conteudo.split(b"\n", 3)
	if len(partes) != 4 or partes[0] != b"P5":
		raise ConfigError(f"{arquivo}: não é um PGM P5")

	w, h = (int(v) for v in partes[1].split())
	maxval = int(partes[2])
	dados = partes[3]
	if maxval != 255 or len(dados) != w * h:
		raise ConfigError(f"{arquivo}: PGM com cabeçalho inesperado")

	return np.frombuffer(dados, dtype=np.uint8).reshape(h, w)


def _criar_pasta(arquivo: str):
	pasta = os.path.dirname(arquivo)
	if pasta:
		os.makedirs(pasta, exist_ok=True)
