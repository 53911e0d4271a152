import pytest
from hypothesis import HealthCheck, settings

from truthval.kg import load_kg
from truthval.ontology import load_ontology
from truthval.pipeline import ConceptMatchTable, OntologyBundle, data_path
from truthval.pra import train_pra

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GEO_CITIES = [
    "Ann Arbor", "Atlanta", "Austin", "Birmingham", "Boulder", "Cambridge", "Chapel Hill",
    "Chicago", "Irvine", "Kirkland", "Los Angeles", "Miami", "Mountain View", "New York",
    "Pittsburgh", "Playa Vista", "Reston", "San Bruno", "San Francisco", "Seattle",
    "Sunnyvale", "Washington DC",
]


@pytest.fixture(scope="session")
def geo_kg():
    return load_kg(data_path("geo_kg.tsv"))


@pytest.fixture(scope="session")
def geo_doc():
    return load_ontology(data_path("geo.ont"))


@pytest.fixture(scope="session")
def geo_bundle(geo_doc):
    return OntologyBundle.build(geo_doc)


@pytest.fixture(scope="session")
def geo_table():
    return ConceptMatchTable.load(data_path("geo_match.tsv"))


@pytest.fixture(scope="session")
def geo_model(geo_kg):
    return train_pra(geo_kg, "OfficeLocationInUS")


@pytest.fixture(scope="session")
def geo_city_concepts(geo_table):
    return [geo_table.match(c, "geo") for c in GEO_CITIES]


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
