import os
import sys

import numpy as np
import pytest

RAIZ = os.path.dirname(os.path.abspath(__file__))
if RAIZ not in sys.path:
	sys.path.insert(0, RAIZ)

from utils.tensor import tensor_write  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
	return np.random.default_rng(1234)


@pytest.fixture
def tmp_sptn(tmp_path):
	"""Grava um tensor num .sptn temporário e devolve o caminho."""
	def gravar(t, nome: str = "t.sptn") -> str:
		caminho = str(tmp_path / nome)
		tensor_write(t, caminho)
		return caminho

	return gravar
