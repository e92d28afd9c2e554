"""Replicate the tuner statistics through the real package APIs."""

import numpy as np

from latentprobe.backends import RenderSession, ToyWorld, build_mean_styles
from latentprobe.backends.toy import (
    AMP_SCALE, CLASS_AMPS, CLASS_CENTERS, CLASS_RADII, FINE_LAYERS, _CONSTANTS,
)
from latentprobe.latent import ADAPTIVE_SCHEDULE, LatentSeed, style_mix

TAU_SSIM, TAU_L2 = 0.95, 0.2
P_MIN, DELTA = 0.80, 0.30


def ssim_l2(x, y):
    x, y = x[:, :, 0], y[:, :, 0]
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for i in range(0, 28, 8):
        for j in range(0, 28, 8):
            tx, ty = x[i:i + 8, j:j + 8], y[i:i + 8, j:j + 8]
            mx, my = tx.mean(), ty.mean()
            vx, vy = tx.var(), ty.var()
            cov = ((tx - mx) * (ty - my)).mean()
            vals.append(((2 * mx * my + c1) * (2 * cov + c2)) /
                        ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals)), float(np.sqrt(((x - y) ** 2).mean()))


def gate(pred, c):
    return pred.top_class == c and pred.top_conf >= P_MIN and pred.margin >= DELTA


def main():
    world = ToyWorld.default()
    print("gains:", _CONSTANTS["gains"].round(3))

    means = build_mean_styles(world.generator, num_samples=4000, rng_seed=0)
    for c, ms in means.items():
        drift = np.abs(ms.w_bar - _CONSTANTS["offsets"][c]).max()
        print(f"mean-style drift class {c}: {drift:.4f}")
    session = RenderSession(world.generator, world.classifier, means)

    fam, t_star = world.amp_family()
    print(f"amp family analytic t* = {t_star:.4f}")
    ts = np.linspace(t_star - 2, t_star + 2, 401)
    labels = []
    for i, t in enumerate(ts):
        img, _ = session.render(fam.seed(t, seed_id=1_000_000 + i), 1.0)
        labels.append(session.classify(img).top_class)
    labels = np.array(labels)
    flips = np.nonzero(labels[:-1] != labels[1:])[0]
    emp = 0.5 * (ts[flips[0]] + ts[flips[0] + 1]) if len(flips) else None
    print(f"amp family empirical flip t = {emp:.4f} (labels {set(labels.tolist())})")

    s = world.seed_for_params(99, 1, (0.60, 0.44), 0.09, 0.75)
    img, w = session.render(s, 1.0)
    from latentprobe.backends.toy import blob_params
    print("constructed params:", np.round(blob_params(w), 6))

    rng = np.random.default_rng(11)
    N = 500
    per = {c: dict(bp=0, flip=0, flip_scr=0, salv=0, fail=0, mix_scr=0) for c in range(3)}
    tot = dict(mixtried=0, lam1=0, mixflip=0, mixmono=0, mix_scr=0)
    psistars, lamstars = [], []
    sid = 0
    for c in range(3):
        for _ in range(N):
            z = rng.standard_normal(4)
            seed = LatentSeed(sid, z, c)
            sid += 1
            base_img, base_w = session.render(seed, 1.0)
            p = session.classify(base_img)
            if gate(p, c):
                per[c]["bp"] += 1
                flip_at = None
                for psi in ADAPTIVE_SCHEDULE[1:]:
                    img, _ = session.render(seed, psi)
                    if session.classify(img).top_class != c:
                        flip_at = psi
                        break
                if flip_at is not None:
                    per[c]["flip"] += 1
                    psistars.append((c, flip_at))
                    img, _ = session.render(seed, flip_at)
                    sv, lv = ssim_l2(base_img.pixels, img.pixels)
                    if sv >= TAU_SSIM and lv <= TAU_L2:
                        per[c]["flip_scr"] += 1
                rivals = [k for k in np.argsort(p.probs)[::-1] if k != c]
                r = int(rivals[0])
                w_r = session.style_code(seed.with_class(r), 1.0)
                tot["mixtried"] += 1
                wm1 = style_mix(base_w, w_r, FINE_LAYERS, 1.0)
                img1 = session.synthesize_mix(wm1)
                p1 = session.classify(img1)
                s1, l1 = ssim_l2(base_img.pixels, img1.pixels)
                if p1.top_class != c and s1 >= TAU_SSIM and l1 <= TAU_L2:
                    tot["lam1"] += 1
                    lams = np.linspace(0, 1, 201)
                    flipped = []
                    for lam in lams:
                        wm = style_mix(base_w, w_r, FINE_LAYERS, float(lam))
                        flipped.append(
                            session.classify(session.synthesize_mix(wm)).top_class != c)
                    flipped = np.array(flipped)
                    if flipped.any():
                        tot["mixflip"] += 1
                        first = int(np.argmax(flipped))
                        if flipped[first:].all():
                            tot["mixmono"] += 1
                        wm = style_mix(base_w, w_r, FINE_LAYERS, float(lams[first]))
                        img = session.synthesize_mix(wm)
                        sv, lv = ssim_l2(base_img.pixels, img.pixels)
                        if sv >= TAU_SSIM and lv <= TAU_L2:
                            tot["mix_scr"] += 1
                            per[c]["mix_scr"] += 1
                            lamstars.append(float(lams[first]))
            else:
                per[c]["fail"] += 1
                for psi in ADAPTIVE_SCHEDULE[1:]:
                    img, _ = session.render(seed, psi)
                    if gate(session.classify(img), c):
                        per[c]["salv"] += 1
                        break

    for c in range(3):
        d = per[c]
        print(f"class {c}: pass {d['bp']}/{N} flips {d['flip']} "
              f"(screened {d['flip_scr']}) mix_scr {d['mix_scr']} "
              f"salvage {d['salv']}/{d['fail']}")
    print("mix:", tot)
    from collections import Counter
    print("psi*:", dict(Counter(psistars)))
    if lamstars:
        print(f"lam*: n={len(lamstars)} min={min(lamstars):.3f} max={max(lamstars):.3f}")
    print(f"session stats: synth={session.stats.synth_calls} "
          f"classify={session.stats.classify_calls} hits={session.stats.cache_hits}")


if __name__ == "__main__":
    main()
