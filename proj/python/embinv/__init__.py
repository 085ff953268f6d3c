# Copyright 2026 The embinv Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Embedding obfuscation and inversion toolkit."""

from embinv._core import (
    DataError,
    EmbeddingTable,
    Error,
    FormatError,
    InvalidArgumentError,
    NgramPrior,
    NumericalError,
    PriorModel,
    ProtocolError,
    UniformPrior,
    asr,
    calibrate_scale,
    decode,
    embed,
    epsilon_from_scale,
    generate_synthetic_table,
    nn_decode,
    obfuscate,
    open_prior,
    pii_recovery,
    run_sweep,
    table_sensitivity,
)

__all__ = [
    "DataError",
    "EmbeddingTable",
    "Error",
    "FormatError",
    "InvalidArgumentError",
    "NgramPrior",
    "NumericalError",
    "PriorModel",
    "ProtocolError",
    "UniformPrior",
    "asr",
    "calibrate_scale",
    "decode",
    "embed",
    "epsilon_from_scale",
    "generate_synthetic_table",
    "nn_decode",
    "obfuscate",
    "open_prior",
    "pii_recovery",
    "run_sweep",
    "table_sensitivity",
]
