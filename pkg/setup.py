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

from setuptools import find_packages, setup

setup(
    name="piclab",
    version="0.1.0",
    description=(
        "Principal inertia components of finite joint distributions and the "
        "estimation, one-bit and privacy bounds derived from them."
    ),
    packages=find_packages(exclude=["fixtures"]),
    package_data={"piclab.cli": ["gin/*.gin"]},
    python_requires=">=3.10",
    install_requires=[
        "torch>=2.6.0",
        "numpy>=1.26.0",
        "scipy>=1.11.0",
        "gin_config>=0.5.0",
        "absl-py>=2.1.0",
        "pandas>=2.2.0",
        "tensorboard>=2.19.0",
    ],
    extras_require={"test": ["hypothesis>=6.100.0"]},
    entry_points={"console_scripts": ["piclab=main:main"]},
    py_modules=["main"],
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    license="Apache-2.0",
)
