"""`python -m dseval ...` forwards to the bundled command-line tool."""

import os
import sys
from pathlib import Path


def main() -> None:
    exe = Path(__file__).with_name("bin") / "dseval"
    if not exe.exists():
        sys.exit("dseval: command-line tool not bundled with this installation")
    os.execv(str(exe), [str(exe), *sys.argv[1:]])


if __name__ == "__main__":
    main()
