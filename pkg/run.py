import os

from dotenv import load_dotenv

from cutfinder.cli import main

if __name__ == "__main__":
    # load environment variables
    load_dotenv(os.path.join(os.path.dirname(__file__), ".env"))
    main()
