import numpy as np
import pytest
from hypothesis import given, strategies as st

from doorverse.geometry import (Box, Cylinder, Pose, point_primitive_surface_distance,
                                pose_about_axis, ray_box, ray_cylinder, ray_scene,
                                rot_axis_angle, rotation_to_rotvec, segment_box_hit)

UNIT_BOX = Box(Pose(), np.array([1.0, 1.0, 1.0]))


def test_ray_box_frontal_hit():
    t = ray_box(np.array([0.0, 0.0, -3.0]), np.array([[0.0, 0.0, 1.0]]), UNIT_BOX)
    assert t[0] == pytest.approx(2.5)


def test_ray_box_miss_is_inf():
    t = ray_box(np.array([0.0, 0.0, -3.0]), np.array([[1.0, 0.0, 0.0]]), UNIT_BOX)
    assert np.isinf(t[0])


def test_ray_box_from_inside_hits_exit_face():
    t = ray_box(np.zeros(3), np.array([[0.0, 0.0, 1.0]]), UNIT_BOX)
    assert t[0] == pytest.approx(0.5)


def test_ray_cylinder_frontal_and_cap():
    cyl = Cylinder(Pose(), radius=0.5, length=2.0)
    side = ray_cylinder(np.array([-3.0, 0.0, 0.0]), np.array([[1.0, 0.0, 0.0]]), cyl)
    assert side[0] == pytest.approx(2.5)
    cap = ray_cylinder(np.array([0.0, 0.0, 5.0]), np.array([[0.0, 0.0, -1.0]]), cyl)
    assert cap[0] == pytest.approx(4.0)


def test_ray_scene_nearest_hit_wins():
    near = Box(Pose(pos=np.array([0.0, 0.0, 1.0])), np.array([0.5, 0.5, 0.5]))
    far = Box(Pose(pos=np.array([0.0, 0.0, 3.0])), np.array([2.0, 2.0, 0.5]))
    t = ray_scene(np.zeros(3), np.array([[0.0, 0.0, 1.0]]), [far, near])
    assert t[0] == pytest.approx(0.75)


@given(st.floats(-np.pi, np.pi))
def test_rotvec_roundtrip(angle):
    axis = np.array([0.3, -0.5, 0.81])
    rot = rot_axis_angle(axis, angle)
    vec = rotation_to_rotvec(rot)
    rot2 = rot_axis_angle(vec, np.linalg.norm(vec)) if np.linalg.norm(vec) > 0 else np.eye(3)
    assert np.abs(rot - rot2).max() < 1e-7


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_pose_about_axis_keeps_pivot_fixed(radius, angle):
    pivot = np.array([radius, -radius, 0.5])
    spin = pose_about_axis(pivot, np.array([0.0, 0.0, 1.0]), angle)
    assert np.linalg.norm(spin.apply(pivot) - pivot) < 1e-12


def test_pose_compose_inverse():
    a = Pose(rot_axis_angle(np.array([0, 0, 1.0]), 0.7), np.array([1.0, 2.0, 3.0]))
    b = a.compose(a.inverse())
    assert b.almost_equal(Pose())


def test_point_surface_distance_box_inside_and_outside():
    assert point_primitive_surface_distance(np.array([0.0, 0.0, 0.5]), UNIT_BOX) == pytest.approx(0.0)
    assert point_primitive_surface_distance(np.array([0.0, 0.0, 1.5]), UNIT_BOX) == pytest.approx(1.0)
    assert point_primitive_surface_distance(np.zeros(3), UNIT_BOX) == pytest.approx(0.5)


def test_segment_box_hit_and_miss():
    assert segment_box_hit(np.array([-2.0, 0, 0]), np.array([2.0, 0, 0]), UNIT_BOX)
    assert not segment_box_hit(np.array([-2.0, 0, 2.0]), np.array([2.0, 0, 2.0]), UNIT_BOX)
    assert segment_box_hit(np.array([-2.0, 0, 0.52]), np.array([2.0, 0, 0.52]), UNIT_BOX,
                           inflate=0.05)
