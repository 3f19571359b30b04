"""
Wrapper script to run the tuning and meta-tuning analyses on an Ant-style CSV.

Runs ``tune`` and then ``meta`` as subprocesses of ``python -m
interval_tuner.main`` with the worked ingestion config in configs/ant.json.
Any extra command-line arguments are forwarded to both commands.

Usage:
    python run_ant.py path/to/ant.csv [--trees 200 --out results/ant ...]
"""

import os
import sys
import logging
import subprocess

logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
logger = logging.getLogger("run_ant")

script_dir = os.path.dirname(os.path.abspath(__file__))
ant_config_path = os.path.join(script_dir, "configs", "ant.json")


def build_command(command, data_path, extra):
    cmd = [sys.executable, "-m", "interval_tuner.main", command,
           "--data", data_path, "--config", ant_config_path]
    cmd.extend(extra)
    return cmd


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(2)
    data_path, extra = sys.argv[1], sys.argv[2:]

    try:
        for command in ("tune", "meta"):
            cmd = build_command(command, data_path, extra)
            logger.info("Starting %s: %s", command, ' '.join(cmd))
            process = subprocess.run(cmd)
            if process.returncode != 0:
                logger.error("%s exited with code %d", command, process.returncode)
                sys.exit(process.returncode)
        sys.exit(0)
    except KeyboardInterrupt:
        print("\nAnalysis stopped by user.")
        sys.exit(130)
