import sys

from dotenv import load_dotenv

from utils.recursos import main

load_dotenv()

if __name__ == "__main__":
	sys.exit(main())
