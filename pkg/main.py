# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

# pyre-unsafe

"""
Command-line entry point. Usage:

    python main.py <decompose|bound|boolean|privacy|verify> --input=<path> [flags]

See README.md for the report formats.
"""

import logging
import sys

import gin

from absl import app, flags
from piclab.cli.run import run, RunConfig, Subcommand
from piclab.common import ValidationError

logging.basicConfig(stream=sys.stdout, level=logging.INFO)

flags.DEFINE_string("input", None, "Distribution JSON, sample CSV or noise pmf JSON.")
flags.DEFINE_string("output", None, "Report path; stdout when unset.")
flags.DEFINE_enum("base", "2", ["2", "e", "10"], "Logarithm base of information values.")
flags.DEFINE_float("tol", 1e-6, "Decomposition consistency tolerance, in (0, 1e-3].")
flags.DEFINE_integer("seed", 0, "Seed of every randomized routine.")
flags.DEFINE_bool("all", False, "bound: report every applicable bound.")
flags.DEFINE_integer("M", None, "bound: size of the function range for P_e,M.")
flags.DEFINE_float("t", None, "privacy: utility level of the funnel estimate.")
flags.DEFINE_integer("n", None, "boolean: bit-string length.")
flags.DEFINE_float("delta", None, "boolean: BSC crossover probability.")
flags.DEFINE_string("csv_curves", None, "privacy: CSV path for region curves.")
flags.DEFINE_bool("transpose", False, "privacy: input has X on rows, S on columns.")
flags.DEFINE_bool("csv_header", True, "Sample CSV files start with a header row.")
flags.DEFINE_string("gin_config_file", None, "Path to the config file.")
FLAGS = flags.FLAGS  # pyre-ignore [5]


def _main(argv) -> None:  # pyre-ignore [2]
    subcommands = [s.value for s in Subcommand]
    if len(argv) != 2 or argv[1] not in subcommands:
        print(f"usage: main.py <{'|'.join(subcommands)}> [flags]", file=sys.stderr)
        sys.exit(1)
    if FLAGS.gin_config_file is not None:
        logging.info(f"loading gin config from {FLAGS.gin_config_file}")
        gin.parse_config_file(FLAGS.gin_config_file)
    try:
        config = RunConfig(
            subcommand=Subcommand(argv[1]),
            input=FLAGS.input,
            output=FLAGS.output,
            base=FLAGS.base,
            tol=FLAGS.tol,
            seed=FLAGS.seed,
            all=FLAGS.all,
            M=FLAGS.M,
            t=FLAGS.t,
            n=FLAGS.n,
            delta=FLAGS.delta,
            csv_curves=FLAGS.csv_curves,
            transpose=FLAGS.transpose,
            csv_header=FLAGS.csv_header,
        )
    except ValidationError as e:
        print(f"piclab: invalid input: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(run(config))


def main() -> None:
    app.run(_main)


if __name__ == "__main__":
    main()
