import pytest

from dlearn import constraints, store, textsim

MOVIE_SCHEMA_TEXT = """\
movies(id:text, title:text, year:integer)
mov2genres(id:text, name:text)
mov2countries(id:text, name:text)
countries(id:text, name:text)
englishMovies(id:text)
mov2releasedate(id:text, month:text, year:integer)
highGrossing(title:text)
"""

MOVIE_ROWS = {
    "movies": [
        ("m1", "Superbad (2007)", "2007"),
        ("m2", "Zoolander (2001)", "2001"),
        ("m3", "Orphanage (2007)", "2007"),
    ],
    "mov2genres": [("m1", "comedy"), ("m2", "comedy"), ("m3", "drama")],
    "mov2countries": [("m1", "c1"), ("m2", "c1"), ("m3", "c2")],
    "countries": [("c1", "USA"), ("c2", "Spain")],
    "englishMovies": [("m1",), ("m2",), ("m3",)],
    "mov2releasedate": [("m1", "August", "2007"), ("m2", "September", "2001")],
}

MOVIE_MD_TEXT = "md: highGrossing[title] ~ movies[title] -> highGrossing[title] <-> movies[title]"


@pytest.fixture(scope="session")
def movie_schema():
    return store.parse_schema(MOVIE_SCHEMA_TEXT, target="highGrossing")


@pytest.fixture(scope="session")
def movie_db(movie_schema):
    return store.from_tuples(movie_schema, MOVIE_ROWS)


@pytest.fixture(scope="session")
def movie_mds(movie_schema):
    mds, _ = constraints.parse_constraints(MOVIE_MD_TEXT, movie_schema)
    return mds


@pytest.fixture(scope="session")
def movie_examples():
    return {
        title: store.Example("highGrossing", (title,))
        for title in ("Superbad", "Zoolander", "Orphanage")
    }


@pytest.fixture(scope="session")
def movie_idx(movie_db, movie_mds, movie_examples):
    return textsim.build_similarity_index(
        movie_db, list(movie_examples.values()), movie_mds, k_m=5, threshold=0.65
    )
