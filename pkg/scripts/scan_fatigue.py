"""Desk-scale fatigue calibration scan (development tool, not shipped API)."""
import json, sys, time
import numpy as np
from pfczm import *

def run_case(tag, mesh_kw, mat_kw, kfs=(0.005, 0.04), smaxes=(0.85, 0.70),
             cap85=80, cap70=400, ipc=10):
    mesh = generate_senb_mesh(**mesh_kw)
    p0 = MaterialParams(**mat_kw, kf=0.01)
    t0 = time.time()
    try:
        fu, plog = measure_ultimate_force(mesh, p0)
    except Exception as e:
        print(f"{tag}: Fu probe failed: {e}", flush=True)
        return
    print(f"{tag}: elements={mesh.n_elements} Fu={fu:.2f} ({time.time()-t0:.0f}s, probe {plog.status})", flush=True)
    for smax in smaxes:
        for kf in kfs:
            p = MaterialParams(**mat_kw, kf=kf)
            cap = cap85 if smax > 0.8 else cap70
            prog = LoadProgram(scenario='LS4', control='force',
                               cycle_blocks=[CycleBlock(smax=smax, smin=0.05, count=cap)],
                               increments_per_cycle=ipc, reference_force=fu, max_cycles=cap)
            t0 = time.time()
            log = run_program(mesh, p, prog)
            r = log.rows[-1]
            print(f"{tag}: S={smax:.2f} kf={kf:.3f} -> {log.status} Nf={log.failure_cycle} "
                  f"a={r['a']:.1f} maxphi={r['max_phi']:.2f} ({time.time()-t0:.0f}s)", flush=True)


def extra_cases():
    E = 30000
    h = 50.0
    base_mesh = dict(height=h, span=2.5*h, notch_depth=h/6, notch_width=2.0,
                     band_halfwidth=6, coarse=6, fine=1.0, ell=5.0, load_width=8)
    return {
      "C7": (dict(base_mesh), dict(E0=E, nu=0.2, ft=3.5, Gf=0.06, ell=5.0)),
      "C8": (dict(base_mesh), dict(E0=E, nu=0.2, ft=3.0, Gf=0.05, ell=5.0)),
      "C9": (dict(base_mesh), dict(E0=E, nu=0.2, ft=4.0, Gf=0.08, ell=5.0)),
    }

if __name__ == "__main__":
    which = sys.argv[1]
    E = 30000
    h = 50.0
    base_mesh = dict(height=h, span=2.5*h, notch_depth=h/6, notch_width=2.0,
                     band_halfwidth=6, coarse=6, fine=1.0, ell=5.0, load_width=8)
    cases = {
      "C1": (dict(base_mesh), dict(E0=E, nu=0.2, ft=6.0, Gf=0.015, ell=5.0)),
      "C2": (dict(base_mesh), dict(E0=E, nu=0.2, ft=6.0, Gf=0.02, ell=5.0)),
      "C3": (dict(base_mesh, ell=7.5, fine=1.5), dict(E0=E, nu=0.2, ft=4.8, Gf=0.03, ell=7.5)),
      "C4": (dict(base_mesh, notch_width=1.0), dict(E0=E, nu=0.2, ft=6.0, Gf=0.02, ell=5.0)),
      "C5": (dict(base_mesh, ell=2.5, fine=0.5, band_halfwidth=3.5, coarse=8),
             dict(E0=E, nu=0.2, ft=6.0, Gf=0.02, ell=2.5)),
      "C6": (dict(base_mesh, ell=2.5, fine=0.5, band_halfwidth=3.5, coarse=8),
             dict(E0=E, nu=0.2, ft=4.8, Gf=0.03, ell=2.5)),
    }
    cases.update(extra_cases())
    mesh_kw, mat_kw = cases[which]
    run_case(which, mesh_kw, mat_kw)
