import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from doorverse.assets import (BODY_TEMPLATES, CATEGORIES, MECHANISMS, TEST_CATEGORIES,
                              AssetCatalog, DoorInstance, build_catalog, compose,
                              generate_body, generate_handle)
from doorverse.errors import CompatibilityError, InvalidArgumentError
from doorverse.geometry import rot_axis_angle


def test_interior_width_within_configured_range():
    spec = generate_body("Interior", 0)
    lo, hi = BODY_TEMPLATES["Interior"]["width"]
    assert lo <= spec.width <= hi


def test_generate_body_deterministic():
    import json
    a = generate_body("Interior", 0).to_dict()
    b = generate_body("Interior", 0).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_safe_thickness_exceeds_interior_max():
    interior_max = BODY_TEMPLATES["Interior"]["thickness"][1]
    spec = generate_body("Safe", 3)
    assert spec.thickness >= interior_max


def test_unknown_category_rejected():
    with pytest.raises(InvalidArgumentError):
        generate_body("Shed", 0)


def test_lever_joint_axis_normal_to_mount_face():
    spec = generate_handle("lever", 1)
    # mount-face normal is local +z
    assert abs(abs(spec.joint_axis @ np.array([0.0, 0.0, 1.0])) - 1.0) < 1e-9


def test_generate_handle_deterministic():
    a = generate_handle("round", 5).to_dict()
    b = generate_handle("round", 5).to_dict()
    assert a == b


def test_valve_anchor_on_rim_surface():
    spec = generate_handle("valve", 2)
    assert spec.surface_distance(spec.grasp_anchor) < 1e-6


@pytest.mark.parametrize("mechanism", MECHANISMS)
def test_all_mechanisms_anchor_on_surface(mechanism):
    for seed in range(5):
        spec = generate_handle(mechanism, seed)
        assert spec.surface_distance(spec.grasp_anchor) < 1e-6
        assert 0.0 < spec.thre < spec.theta_h_max


def test_unknown_mechanism_rejected():
    with pytest.raises(InvalidArgumentError):
        generate_handle("crank", 0)


def test_compose_identity_fk_places_handle_at_socket(lever_interior):
    fk = lever_interior.fk_handle(0.0, 0.0)
    assert fk.almost_equal(lever_interior.body.socket_pose, tol=1e-9)


def test_compose_fk_door_rotation_is_rigid_rotation(lever_interior):
    inst = lever_interior
    theta = math.pi / 2.0
    fk = inst.fk_handle(theta, 0.0)
    hinge = inst.body.hinge_pos
    rot = rot_axis_angle(np.array([0.0, 0.0, 1.0]), inst.body.open_sign * theta)
    expected = hinge + rot @ (inst.body.socket_pose.pos - hinge)
    assert np.linalg.norm(fk.pos - expected) < 1e-9


def test_compose_rejects_handle_thicker_than_aperture():
    body = generate_body("Interior", 0)
    handle = generate_handle("lever", 1)
    fat = type(handle)(**{**handle.__dict__, "anchor_thickness": 0.10})
    with pytest.raises(CompatibilityError) as err:
        compose(body, fat, aperture=0.08)
    assert "0.100" in str(err.value)


def test_fk_two_joint_composition_consistency(small_catalog):
    rng = np.random.default_rng(3)
    insts = list(small_catalog.instances.values())
    for _ in range(100):
        inst = insts[rng.integers(len(insts))]
        th_d = rng.random() * inst.body.theta_d_max
        th_h = rng.random() * inst.handle.theta_h_max
        fk = inst.fk_handle(th_d, th_h)
        # product of the individual joint transforms
        board = inst.board_pose(th_d)
        joint = board.compose(inst.body.socket_pose).compose(inst.handle.joint_origin)
        from doorverse.geometry import Pose
        spin = Pose(rot_axis_angle(inst.handle.joint_axis, th_h))
        expected = joint.compose(spin)
        dp, dr = fk.error_to(expected)
        assert dp < 1e-9 and dr < 1e-9


def test_build_catalog_counts_and_splits():
    cat = build_catalog(10, 0.25, seed=0)
    assert len(cat.instances) == 60
    interior_test = [i for i in cat.ids_for("test_shape", "Interior")]
    assert len(interior_test) == 3  # ceil(0.25 * 10)
    for iid in cat.by_category["Refrigerator"]:
        assert cat.instances[iid].split_tag == "test_category"
    cat.validate()


def test_build_catalog_rejects_bad_args():
    with pytest.raises(InvalidArgumentError):
        build_catalog(0, 0.25, seed=0)
    with pytest.raises(InvalidArgumentError):
        build_catalog(5, 1.5, seed=0)


def test_catalog_split_soundness(small_catalog):
    train = set(small_catalog.split_ids("train"))
    shape = set(small_catalog.split_ids("test_shape"))
    categ = set(small_catalog.split_ids("test_category"))
    assert not (train & shape) and not (train & categ) and not (shape & categ)
    assert train | shape | categ == set(small_catalog.instances)


@given(st.integers(0, 10_000))
def test_instance_serialization_roundtrip_and_determinism(seed):
    body = generate_body("Window", seed % 50)
    handle = generate_handle("lever", seed % 50)
    inst = compose(body, handle)
    text = inst.to_json()
    again = compose(generate_body("Window", seed % 50), generate_handle("lever", seed % 50))
    assert again.to_json() == text
    back = DoorInstance.from_json(text)
    assert back.to_json() == text


def test_catalog_save_load_roundtrip(tmp_path, small_catalog):
    small_catalog.save(tmp_path)
    back = AssetCatalog.load(tmp_path)
    assert set(back.instances) == set(small_catalog.instances)
    for iid in back.instances:
        assert back.instances[iid].to_json() == small_catalog.instances[iid].to_json()
    assert back.content_hash() == small_catalog.content_hash()


def test_every_composed_instance_is_compatible(small_catalog):
    for inst in small_catalog.instances.values():
        assert inst.handle.anchor_thickness < 0.08
