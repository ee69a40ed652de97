import pytest

from phonmt.lexicon import load_default_lexicon, load_lexicon


@pytest.fixture(scope="session")
def default_lexicon():
    return load_default_lexicon()


TINY_LEXICON = """\
# tiny test lexicon
有\tyou3
又\tyou4
好\thao3
行\txing2
行\thang2
与\tyu3
于\tyu2
很\then3
中\tzhong1
国\tguo2
中国\tzhong1 guo2
"""


@pytest.fixture()
def tiny_lexicon(tmp_path):
    path = tmp_path / "tiny.tsv"
    path.write_text(TINY_LEXICON, encoding="utf-8")
    return load_lexicon(path)


@pytest.fixture()
def write_lexicon(tmp_path):
    def _write(text, name="lex.tsv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
