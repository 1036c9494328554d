import logging
import sys

from typing import Iterable

FORMATO = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger("listra")


def configurar_logs(level: str | int = "WARNING") -> logging.Logger:
	"""
	Configura o logger raiz do projeto (stderr, formato fixo).
	Chamadas repetidas só ajustam o nível.
	"""
	if isinstance(level, str):
		level = logging.getLevelName(level.upper())
		if not isinstance(level, int):
			level = logging.WARNING

	raiz = logging.getLogger()
	if not any(getattr(h, "_listra", False) for h in raiz.handlers):
		handler = logging.StreamHandler(sys.stderr)
		handler.setFormatter(logging.Formatter(FORMATO))
		handler._listra = True
		raiz.addHandler(handler)

	raiz.setLevel(level)
	return logger


def registrar_execucao(comando: str, seed: int | None, artefatos: Iterable[str] = ()):
	artefatos = [a for a in artefatos if a]
	logger.info(
		"%s concluído (seed=%s)%s",
		comando,
		seed if seed is not None else "-",
		f" -> {', '.join(artefatos)}" if artefatos else "",
	)
