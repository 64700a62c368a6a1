"""Entry point for ``python -m advstyle_lab`` and the ``advstyle-lab`` script."""

from advstyle_lab.cli import main

if __name__ == "__main__":
    main()
