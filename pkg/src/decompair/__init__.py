"""Function-level (assembly, source) corpora and evaluation for neural decompilation."""

from .asm import extract_functions, parse_asm, resolve_source
from .backend import KNNDecompiler, serve
from .dataset import FunctionPair, batch_by_tokens, build, contraction_stats, split
from .metrics import edit_distance, evaluate, normalized_ed
from .profiles import SourcePreprocessor, builtin_profiles, preprocess, profile_for_extension
from .tokenizer import SubwordTokenizer, decode, encode, train

__version__ = "0.1.0"

__all__ = [
    "KNNDecompiler",
    "SourcePreprocessor",
    "SubwordTokenizer",
    "FunctionPair",
    "parse_asm",
    "extract_functions",
    "resolve_source",
    "builtin_profiles",
    "profile_for_extension",
    "preprocess",
    "train",
    "encode",
    "decode",
    "build",
    "split",
    "batch_by_tokens",
    "contraction_stats",
    "edit_distance",
    "normalized_ed",
    "evaluate",
    "serve",
]
