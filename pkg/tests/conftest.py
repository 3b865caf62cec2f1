"""Shared fixtures: one small deployment for fast checks, one at full scale."""

import pytest

from cfisac import ScenarioConfig
from cfisac.detector import assemble_sensing_model
from cfisac.precoding import build_precoders
from cfisac.scene import build_scene


@pytest.fixture(scope="session")
def small_config():
    # shrunk geometry keeps solver and Monte Carlo work in the millisecond range
    return ScenarioConfig(
        num_tx_aps=3,
        num_rx_aps=4,
        num_ues=3,
        antennas_per_ap=4,
        grid_points_per_side=2,
        weight_steps=5,
        opt_trials=2000,
        report_trials=4000,
    )


@pytest.fixture(scope="session")
def small_scene(small_config):
    return build_scene(small_config, small_config.master_seed)


@pytest.fixture(scope="session")
def default_config():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def default_scene(default_config):
    return build_scene(default_config, default_config.master_seed)


def make_point_model(scene, config, point_index=0):
    """Precoders plus sensing model for one grid point; returned as a triple."""
    sc = scene.for_point(point_index)
    precoders = build_precoders(
        sc.channels, config.rzf_regularizer_value, config.antennas_per_ap
    )
    model = assemble_sensing_model(sc.channels, sc.angles, precoders.sensing_slices())
    return sc, precoders, model


@pytest.fixture(scope="session")
def small_point(small_scene, small_config):
    return make_point_model(small_scene, small_config)


@pytest.fixture(scope="session")
def default_point(default_scene, default_config):
    return make_point_model(default_scene, default_config)
