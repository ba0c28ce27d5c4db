import runpy
import sys

sys.path.insert(0, "app")
runpy.run_path("app/cli.py", run_name="__main__")
