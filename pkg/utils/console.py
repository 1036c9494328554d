from typing import Iterable, Mapping, Sequence


def _celula(valor) -> str:
	if isinstance(valor, float):
		return f"{valor:.6g}"
	return str(valor)


def formatar_tabela(colunas: Sequence[str], linhas: Iterable[Mapping[str, object]]) -> str:
	"""Tabela de texto alinhada, com cabeçalho e separador."""
	corpo = [[_celula(linha[c]) for c in colunas] for linha in linhas]
	larguras = [max([len(c)] + [len(l[i]) for l in corpo]) for i, c in enumerate(colunas)]

	def juntar(celulas: Sequence[str]) -> str:
		return "  ".join(c.ljust(w) for c, w in zip(celulas, larguras)).rstrip()

	saida = [juntar(colunas), juntar(["-" * w for w in larguras])]
	saida.extend(juntar(l) for l in corpo)
	return "\n".join(saida)


def mostrar_tabela(colunas: Sequence[str], linhas: Iterable[Mapping[str, object]]):
	print(formatar_tabela(colunas, linhas))


def mostrar_seed(seed: int):
	print(f"seed: {seed}")


def mostrar(msg: str):
	print(msg)
