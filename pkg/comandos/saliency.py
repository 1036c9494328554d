import argparse

from utils.console import mostrar
from utils.data import salvar_pgm
from utils.logs import registrar_execucao
from utils.recursos import Comando, Listra
from utils.saliency import sobel_magnitude
from utils.tensor import tensor_read, tensor_write


class SaliencyComando(Comando):
	nome = "saliency"
	ajuda = "Mapa de saliência (magnitude de Sobel) de um mapa de features H×W×D."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--in", dest="entrada", required=True, help="tensor H×W×D (ou H×W) em .sptn")
		parser.add_argument("--out", dest="saida", required=True, help="mapa H×W em .sptn")
		parser.add_argument("--pgm", default=None, help="imagem P5 do mapa, normalizada para 0-255")

	def executar(self, args: argparse.Namespace):
		mapa = sobel_magnitude(tensor_read(args.entrada))
		tensor_write(mapa.m, args.saida)

		if args.pgm:
			salvar_pgm(args.pgm, mapa.m)

		mostrar(f"saliência {mapa.shape}: mín {float(mapa.m.min()):.6g}, máx {float(mapa.m.max()):.6g}")
		registrar_execucao(self.nome, None, (args.saida, args.pgm))


def setup(app: Listra):
	app.add_comando(SaliencyComando(app))
