"""Enable running as a module: python -m abr_ladder."""

from abr_ladder.cli import main


if __name__ == "__main__":
    main()
