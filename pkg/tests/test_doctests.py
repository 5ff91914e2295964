import doctest

import decompair.tokenizer


def test_docstring_examples():
    result = doctest.testmod(decompair.tokenizer)
    assert result.attempted and not result.failed
