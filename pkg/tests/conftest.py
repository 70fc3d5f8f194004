import pytest

from costwise.hub import extract_training_rows
from costwise.workbench import WorkloadConfig, gen_workload, train_from_days

SMALL = WorkloadConfig(n_templates=10, instances_per_template=6, days=3, seed=11)


@pytest.fixture(scope="session")
def small_workload():
    return gen_workload(SMALL)


@pytest.fixture(scope="session")
def small_store(small_workload):
    return train_from_days(small_workload.days[:2])


@pytest.fixture(scope="session")
def small_rows(small_workload):
    return [extract_training_rows(day) for day in small_workload.days]
