"""Naive, loop-based reference implementation of the edge pipeline.

Written against the stage definitions, not the production code: plain
Python integer loops, index clamping for replicate borders, ``math.sqrt``
magnitudes, and a breadth-first hysteresis pass. Every stage sticks to
exact integer inputs (the tangent comparisons and the square root are the
only float operations, and both are correctly rounded), so the production
pipeline must agree with this one bit for bit, not just approximately.
"""

import math
from collections import deque

TAN_22_5 = math.tan(math.pi / 8.0)
TAN_67_5 = math.tan(3.0 * math.pi / 8.0)


def reference_grayscale(pixels) -> list[list[int]]:
    """BT.601 luma with round-half-up in pure integer arithmetic."""
    height = len(pixels)
    width = len(pixels[0])
    out = []
    for y in range(height):
        row = []
        for x in range(width):
            px = pixels[y][x]
            try:
                r, g, b = (int(v) for v in px)
            except TypeError:
                row.append(int(px))
                continue
            row.append((299 * r + 587 * g + 114 * b + 500) // 1000)
        out.append(row)
    return out


def reference_sobel(gray: list[list[int]], norm: str = "l2"):
    """3x3 Sobel with replicate borders; returns (gx, gy, magnitude)."""
    height = len(gray)
    width = len(gray[0])

    def at(y: int, x: int) -> int:
        return gray[min(max(y, 0), height - 1)][min(max(x, 0), width - 1)]

    gx = [[0] * width for _ in range(height)]
    gy = [[0] * width for _ in range(height)]
    mag = [[0] * width for _ in range(height)]
    for y in range(height):
        for x in range(width):
            dx = (
                at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)
                - at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1)
            )
            dy = (
                at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)
                - at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1)
            )
            gx[y][x] = dx
            gy[y][x] = dy
            if norm == "l2":
                mag[y][x] = math.floor(math.sqrt(dx * dx + dy * dy) + 0.5)
            else:
                mag[y][x] = abs(dx) + abs(dy)
    return gx, gy, mag


def reference_nms(gx, gy, mag) -> list[list[bool]]:
    """Keep a pixel iff it beats its forward neighbor strictly and its
    backward neighbor weakly along the quantized gradient direction."""
    height = len(mag)
    width = len(mag[0])
    kept = [[False] * width for _ in range(height)]
    for y in range(1, height - 1):
        for x in range(1, width - 1):
            ax = float(abs(gx[y][x]))
            ay = float(abs(gy[y][x]))
            if ay <= ax * TAN_22_5:
                forward, backward = (0, 1), (0, -1)
            elif ay >= ax * TAN_67_5:
                forward, backward = (1, 0), (-1, 0)
            elif gx[y][x] * gy[y][x] > 0:
                forward, backward = (1, 1), (-1, -1)
            else:
                forward, backward = (-1, 1), (1, -1)
            center = mag[y][x]
            fy, fx_ = y + forward[0], x + forward[1]
            by, bx = y + backward[0], x + backward[1]
            kept[y][x] = center > mag[fy][fx_] and center >= mag[by][bx]
    return kept


def reference_canny(pixels, low: int, high: int, norm: str = "l2") -> list[list[bool]]:
    """Full pipeline: grayscale, Sobel, NMS, double-threshold hysteresis."""
    gray = reference_grayscale(pixels)
    gx, gy, mag = reference_sobel(gray, norm)
    kept = reference_nms(gx, gy, mag)
    height = len(gray)
    width = len(gray[0])
    candidate = [
        [kept[y][x] and mag[y][x] > low for x in range(width)] for y in range(height)
    ]
    edges = [[False] * width for _ in range(height)]
    queue = deque()
    for y in range(height):
        for x in range(width):
            if candidate[y][x] and mag[y][x] > high:
                edges[y][x] = True
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < height and 0 <= nx < width:
                    if candidate[ny][nx] and not edges[ny][nx]:
                        edges[ny][nx] = True
                        queue.append((ny, nx))
    return edges
