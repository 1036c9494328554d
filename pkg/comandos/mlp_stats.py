import argparse

from utils.console import mostrar_seed, mostrar_tabela
from utils.data import STATS_COLUNAS, DataFiles, StatsRow, salvar_csv
from utils.encoder import Modo, encoder_forward, init_weights
from utils.logs import registrar_execucao
from utils.mlp import mlp_block_stats
from utils.recursos import Comando, Listra
from utils.tensor import tensor_read

from .encode import carregar_config


class MlpStatsComando(Comando):
	nome = "mlp-stats"
	ajuda = "Correlação entre dissimilaridade dos tokens e magnitude da atualização do MLP, por bloco."

	def configurar(self, parser: argparse.ArgumentParser):
		parser.add_argument("--config", default=DataFiles.CONFIG.caminho, help="arquivo chave=valor do encoder")
		parser.add_argument("--in", dest="entrada", required=True, help="tensor H×W×D em .sptn")
		parser.add_argument("--csv", default=None, help="tabela layer,K,rho,mean_u_keep,mean_u_bypass,drift")
		self.adicionar_seed(parser)

	def executar(self, args: argparse.Namespace):
		cfg = carregar_config(args)
		mostrar_seed(cfg.seed)

		linhas: list[StatsRow] = []

		def observar(bloco, tokens, pesos, sigma, roteador):
			linhas.append(mlp_block_stats(bloco, tokens, pesos, sigma, roteador))

		encoder_forward(tensor_read(args.entrada), init_weights(cfg), cfg, Modo.SPARSE, observar)
		mostrar_tabela(STATS_COLUNAS, linhas)

		if args.csv:
			salvar_csv(args.csv, STATS_COLUNAS, linhas)
		registrar_execucao(self.nome, cfg.seed, (args.csv,))


def setup(app: Listra):
	app.add_comando(MlpStatsComando(app))
