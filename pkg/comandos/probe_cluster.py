import argparse

from utils.console import mostrar_seed, mostrar_tabela
from utils.data import PROBE_COLUNAS, ProbeRow, salvar_csv
from utils.errors import ShapeError
from utils.logs import registrar_execucao
from utils.mlp import kmeans_replace, relative_perturbation
from utils.recursos import Comando, Listra, lista_inteiros
from utils.tensor import tensor_read


class ProbeClusterComando(Comando):
	nome = "probe-cluster"
	ajuda = "Substitui os tokens pelos centróides do k-means e mede distorção e perturbação."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--in", dest="entrada", required=True, help="tokens N×d (ou H×W×d) em .sptn")
		parser.add_argument("--k", type=lista_inteiros, default=[64, 128, 256], help="lista de k (padrão: 64,128,256)")
		parser.add_argument("--iters", type=int, default=25, help="iterações de Lloyd (padrão: 25)")
		parser.add_argument("--csv", default=None, help="tabela k,distortion,perturbation")
		self.adicionar_seed(parser)

	def executar(self, args: argparse.Namespace):
		seed = self.resolver_seed(args)
		mostrar_seed(seed)

		tokens = tensor_read(args.entrada)
		if tokens.ndim < 2:
			raise ShapeError(f"tokens devem ter rank >= 2, recebido {tokens.shape}")
		tokens = tokens.reshape(-1, tokens.shape[-1])

		linhas: list[ProbeRow] = []
		for k in args.k:
			substituido, distorcao = kmeans_replace(tokens, k, seed, args.iters)
			linhas.append({"k": k, "distortion": distorcao, "perturbation": relative_perturbation(tokens, substituido)})

		mostrar_tabela(PROBE_COLUNAS, linhas)
		if args.csv:
			salvar_csv(args.csv, PROBE_COLUNAS, linhas)
		registrar_execucao(self.nome, seed, (args.csv,))


def setup(app: Listra):
	app.add_comando(ProbeClusterComando(app))
