"""Smoke test for the pyrops3d extension.

Build it with `maturin develop -m crates/python/Cargo.toml`, or
`cargo build --release -p pyrops3d` and point PYROPS3D_DIR at a directory
holding the library renamed to pyrops3d.so.
"""

import math
import os
import sys
import tempfile

if os.environ.get("PYROPS3D_DIR"):
    sys.path.insert(0, os.environ["PYROPS3D_DIR"])

import pyrops3d as rp


def matmul(a, b):
    return [[sum(a[r][k] * b[k][c] for k in range(3)) for c in range(3)] for r in range(3)]


def angle_deg(a, b):
    # rotation angle of a^T b
    tr = sum(a[k][i] * b[k][i] for i in range(3) for k in range(3))
    return math.degrees(math.acos(max(-1.0, min(1.0, (tr - 1.0) / 2.0))))


def main():
    names = rp.bundled_names()
    models = [rp.Mesh.bundled(n) for n in names[:3]]
    mr = models[0].resolution()
    assert mr > 0

    params = rp.RopsParams()
    assert params.descriptor_len() == 135
    p = models[0].vertices()[0]
    d = rp.describe(models[0], p, 15 * mr, params)
    assert len(d) == 135 and all(math.isfinite(x) for x in d)

    f0 = rp.local_frame(models[0], p, 15 * mr)
    rot = [[0, 1, 0], [-1, 0, 0], [0, 0, 1]]
    moved = models[0].transformed(rot, [1.0, 2.0, 3.0])
    f1 = rp.local_frame(moved, moved.vertices()[0], 15 * mr)
    # the frame rotates with the surface
    assert angle_deg(f1.axes, matmul(f0.axes, rot)) < 1e-6

    lib = rp.Library.build(list(zip(names[:3], models)), seeds_per_model=300)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "lib.ropslib")
        lib.save(path)
        again = rp.Library.load(path)
        assert again.to_bytes() == lib.to_bytes()
        assert again.model_names() == names[:3]

    scene, poses = rp.synth_scene(models, instances=3, seed=1)
    result = rp.recognize(scene, lib)
    assert len(result.segmentation) == scene.vertex_count
    hits = 0
    for inst in result.instances:
        for model_id, rot, t in poses:
            if model_id == inst.model and angle_deg(rot, inst.rotation) < 5:
                hits += 1
                break
    print(f"{len(result.instances)} instance(s), {hits}/{len(poses)} matched ground truth")
    assert hits == len(poses)
    print("pyrops3d smoke test passed")


if __name__ == "__main__":
    main()
