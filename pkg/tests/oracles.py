"""Independent brute-force reference implementations used by the test suite.

Everything here is written per pixel / per element with plain Python loops,
no vectorization shortcuts, so it can serve as an oracle for the production
code paths.
"""

import numpy as np

SOBEL_X = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
SOBEL_Y = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]


def _clamp(i, n):
    return 0 if i < 0 else (n - 1 if i >= n else i)


def naive_grayscale(rgb):
    _, h, w = rgb.shape
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = 0.299 * rgb[0, i, j] + 0.587 * rgb[1, i, j] + 0.114 * rgb[2, i, j]
    return out


def naive_sobel(gray):
    h, w = gray.shape
    ix = np.empty((h, w))
    iy = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            sx = 0.0
            sy = 0.0
            for t, c in ((0, 1.0), (1, 2.0), (2, 1.0)):
                right = gray[_clamp(i + t - 1, h), _clamp(j + 1, w)]
                left = gray[_clamp(i + t - 1, h), _clamp(j - 1, w)]
                sx += c * (right - left)
                bottom = gray[_clamp(i + 1, h), _clamp(j + t - 1, w)]
                top = gray[_clamp(i - 1, h), _clamp(j + t - 1, w)]
                sy += c * (bottom - top)
            ix[i, j] = sx
            iy[i, j] = sy
    return ix, iy


def naive_structure_tensor(ix, iy, window):
    h, w = ix.shape
    r = window // 2
    sxx = np.empty((h, w))
    sxy = np.empty((h, w))
    syy = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            axx = 0.0
            axy = 0.0
            ayy = 0.0
            for u in range(window):
                for v in range(window):
                    ii = _clamp(i + u - r, h)
                    jj = _clamp(j + v - r, w)
                    gx = ix[ii, jj]
                    gy = iy[ii, jj]
                    axx += gx * gx
                    axy += gx * gy
                    ayy += gy * gy
            sxx[i, j] = axx
            sxy[i, j] = axy
            syy[i, j] = ayy
    return sxx, sxy, syy


def naive_min_eigen(sxx, sxy, syy):
    import math

    h, w = sxx.shape
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            half_trace = (sxx[i, j] + syy[i, j]) / 2.0
            half_diff = (sxx[i, j] - syy[i, j]) / 2.0
            out[i, j] = half_trace - math.sqrt(
                half_diff * half_diff + sxy[i, j] * sxy[i, j]
            )
    return out


def naive_harris(sxx, sxy, syy, k):
    h, w = sxx.shape
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            trace = sxx[i, j] + syy[i, j]
            out[i, j] = (sxx[i, j] * syy[i, j] - sxy[i, j] * sxy[i, j]) - k * (
                trace * trace
            )
    return out


def naive_threshold_nms(response, quality_level, min_distance, max_corners):
    h, w = response.shape
    rmax = response.max()
    mask = np.zeros((h, w), dtype=np.uint8)
    if rmax <= 0.0:
        return mask, []
    threshold = quality_level * rmax
    candidates = [
        (i, j, response[i, j])
        for i in range(h)
        for j in range(w)
        if response[i, j] > threshold
    ]
    candidates.sort(key=lambda t: (-t[2], t[0], t[1]))
    accepted = []
    for r, c, v in candidates:
        if all(max(abs(r - ar), abs(c - ac)) >= min_distance for ar, ac, _ in accepted):
            accepted.append((r, c, v))
            if len(accepted) >= max_corners:
                break
    for r, c, _ in accepted:
        mask[r, c] = 1
    return mask, accepted


def naive_detect_corners(image, params):
    """Full per-pixel pipeline mirroring the production stage order."""
    image = np.asarray(image, dtype=np.float64)
    gray = naive_grayscale(image) if image.ndim == 3 else image
    ix, iy = naive_sobel(gray)
    sxx, sxy, syy = naive_structure_tensor(ix, iy, params.window)
    if params.kind == "harris":
        response = naive_harris(sxx, sxy, syy, params.harris_k)
    else:
        response = naive_min_eigen(sxx, sxy, syy)
    return naive_threshold_nms(
        response, params.quality_level, params.min_distance, params.max_corners
    )


def _replicate_pad_lists(rows, r):
    h = len(rows)
    padded_rows = []
    for i in range(-r, h + r):
        src = rows[_clamp(i, h)]
        padded_rows.append([src[0]] * r + list(src) + [src[-1]] * r)
    return padded_rows


def naive_detect_corners_fullres(image, params):
    """Per-pixel brute-force pipeline on plain Python floats.

    Same math as naive_detect_corners but structured for speed (explicit
    replicate padding, row caching) so whole-image sweeps stay cheap. Python
    floats are IEEE doubles, so results are bit-identical to per-pixel numpy.
    Returns {kind: (mask, corners)} for both response kinds in one pass.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        r_ch, g_ch, b_ch = (image[c].tolist() for c in range(3))
        h = len(r_ch)
        w = len(r_ch[0])
        gray = [
            [
                0.299 * r_ch[i][j] + 0.587 * g_ch[i][j] + 0.114 * b_ch[i][j]
                for j in range(w)
            ]
            for i in range(h)
        ]
    else:
        gray = image.tolist()
        h, w = len(gray), len(gray[0])

    gp = _replicate_pad_lists(gray, 1)
    ix = [[0.0] * w for _ in range(h)]
    iy = [[0.0] * w for _ in range(h)]
    for i in range(h):
        r0, r1, r2 = gp[i], gp[i + 1], gp[i + 2]
        out_x = ix[i]
        out_y = iy[i]
        for j in range(w):
            # Unrolled tap order matches the production accumulation exactly.
            out_x[j] = (
                1.0 * (r0[j + 2] - r0[j])
                + 2.0 * (r1[j + 2] - r1[j])
                + 1.0 * (r2[j + 2] - r2[j])
            )
            out_y[j] = (
                1.0 * (r2[j] - r0[j])
                + 2.0 * (r2[j + 1] - r0[j + 1])
                + 1.0 * (r2[j + 2] - r0[j + 2])
            )

    win = params.window
    r = win // 2
    pxx = _replicate_pad_lists([[v * v for v in row] for row in ix], r)
    pxy = _replicate_pad_lists(
        [[a * b for a, b in zip(rx, ry)] for rx, ry in zip(ix, iy)], r
    )
    pyy = _replicate_pad_lists([[v * v for v in row] for row in iy], r)

    import math

    results = {}
    sxx = [[0.0] * w for _ in range(h)]
    sxy = [[0.0] * w for _ in range(h)]
    syy = [[0.0] * w for _ in range(h)]
    for i in range(h):
        rows_xx = pxx[i : i + win]
        rows_xy = pxy[i : i + win]
        rows_yy = pyy[i : i + win]
        out_xx = sxx[i]
        out_xy = sxy[i]
        out_yy = syy[i]
        if win == 3:
            x0, x1, x2 = rows_xx
            y0, y1, y2 = rows_xy
            z0, z1, z2 = rows_yy
            for j in range(w):
                j1 = j + 1
                j2 = j + 2
                # taps added row-major, exactly the production order
                out_xx[j] = x0[j] + x0[j1] + x0[j2] + x1[j] + x1[j1] + x1[j2] + x2[j] + x2[j1] + x2[j2]
                out_xy[j] = y0[j] + y0[j1] + y0[j2] + y1[j] + y1[j1] + y1[j2] + y2[j] + y2[j1] + y2[j2]
                out_yy[j] = z0[j] + z0[j1] + z0[j2] + z1[j] + z1[j1] + z1[j2] + z2[j] + z2[j1] + z2[j2]
        else:
            for j in range(w):
                # sum(slice, acc) accumulates left to right from acc, the
                # same per-tap order as the production loop.
                axx = 0.0
                axy = 0.0
                ayy = 0.0
                for u in range(win):
                    axx = sum(rows_xx[u][j : j + win], axx)
                    axy = sum(rows_xy[u][j : j + win], axy)
                    ayy = sum(rows_yy[u][j : j + win], ayy)
                out_xx[j] = axx
                out_xy[j] = axy
                out_yy[j] = ayy

    for kind in ("shi_tomasi", "harris"):
        resp = [[0.0] * w for _ in range(h)]
        for i in range(h):
            for j in range(w):
                a, b, c = sxx[i][j], sxy[i][j], syy[i][j]
                if kind == "shi_tomasi":
                    half_trace = (a + c) / 2.0
                    half_diff = (a - c) / 2.0
                    resp[i][j] = half_trace - math.sqrt(half_diff * half_diff + b * b)
                else:
                    trace = a + c
                    resp[i][j] = (a * c - b * b) - params.harris_k * (trace * trace)
        results[kind] = naive_threshold_nms(
            np.array(resp), params.quality_level, params.min_distance, params.max_corners
        )
    return results


def naive_char_alignment(a, b):
    """All-alignments enumeration: minimum edit cost, then maximum matches.

    Returns (cost, matches) over every possible alignment of the two strings,
    found by exhaustive recursion. Only usable for short strings.
    """
    best = [None]

    def rec(i, j, cost, matches):
        if i == len(a) and j == len(b):
            cur = best[0]
            if cur is None or cost < cur[0] or (cost == cur[0] and matches > cur[1]):
                best[0] = (cost, matches)
            return
        if i < len(a) and j < len(b):
            if a[i] == b[j]:
                rec(i + 1, j + 1, cost, matches + 1)
            else:
                rec(i + 1, j + 1, cost + 1, matches)
        if i < len(a):
            rec(i + 1, j, cost + 1, matches)
        if j < len(b):
            rec(i, j + 1, cost + 1, matches)

    rec(0, 0, 0, 0)
    return best[0]


def naive_cc_loss(features, labels, temperature):
    """Double-loop evaluation of the character contrastive objective.

    features: (n, d) unit rows; labels: (n,). Mean over anchors that have at
    least one positive. Uses long-double exponentials, no stabilization.
    """
    n = features.shape[0]
    total = 0.0
    contributing = 0
    for i in range(n):
        pos = [p for p in range(n) if p != i and labels[p] == labels[i]]
        if not pos:
            continue
        contributing += 1
        denom = np.longdouble(0.0)
        for s in range(n):
            if s == i:
                continue
            denom += np.exp(np.longdouble(features[i] @ features[s]) / temperature)
        acc = np.longdouble(0.0)
        for p in pos:
            num = np.exp(np.longdouble(features[i] @ features[p]) / temperature)
            acc += np.log(num / denom)
        total += float(-acc / len(pos))
    return total / contributing if contributing else 0.0
