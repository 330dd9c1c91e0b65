/**
 * Deterministic force-directed placement for the grid graph.
 *
 * No randomness: roots sit anchored on an ellipse, children seed next to
 * their parent and relax under spring / repulsion / centering forces for a
 * fixed iteration count, so the same topology always lays out the same way
 * (a refresh keeps the picture).
 */

import type { Topology } from './types.js';

export interface Point {
  x: number;
  y: number;
}

const SPRING_LENGTH = 95;
const SPRING_K = 0.06;
const REPULSION = 5200;
const CENTER_PULL = 0.012;
const STEP = 0.85;
const PADDING = 40;

export function layoutTopology(
  topo: Topology,
  width: number,
  height: number,
  iterations = 260,
): Map<string, Point> {
  const names = topo.nodes.map((n) => n.name);
  const index = new Map(names.map((n, i) => [n, i]));
  const n = names.length;
  const cx = width / 2;
  const cy = height / 2;

  // seed roots on a ring and children around their parent, so relaxation
  // only spreads siblings; attachment is never up for grabs
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  const roots = topo.nodes.filter((node) => node.parent === null);
  const anchored = new Set<number>();
  const rx = width / 2 - PADDING - SPRING_LENGTH;
  const ry = height / 2 - PADDING - SPRING_LENGTH;
  roots.forEach((node, k) => {
    const angle = (2 * Math.PI * k) / Math.max(roots.length, 1);
    const i = index.get(node.name)!;
    anchored.add(i);
    xs[i] = cx + (roots.length > 1 ? rx * Math.cos(angle) : 0);
    ys[i] = cy + (roots.length > 1 ? ry * Math.sin(angle) : 0);
  });
  const childRank = new Map<string, number>();
  for (const node of topo.nodes) {
    if (node.parent === null || !index.has(node.parent)) continue;
    const i = index.get(node.name)!;
    const p = index.get(node.parent)!;
    const rank = childRank.get(node.parent) ?? 0;
    childRank.set(node.parent, rank + 1);
    const angle = rank * 2.3999632; // golden angle: distinct directions
    xs[i] = xs[p] + SPRING_LENGTH * 0.8 * Math.cos(angle);
    ys[i] = ys[p] + SPRING_LENGTH * 0.8 * Math.sin(angle);
  }

  const edges: [number, number][] = [];
  for (const node of topo.nodes) {
    if (node.parent !== null && index.has(node.parent)) {
      edges.push([index.get(node.name)!, index.get(node.parent)!]);
    }
  }

  const fx = new Float64Array(n);
  const fy = new Float64Array(n);
  for (let it = 0; it < iterations; it++) {
    fx.fill(0);
    fy.fill(0);
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = xs[i] - xs[j];
        let dy = ys[i] - ys[j];
        let d2 = dx * dx + dy * dy;
        if (d2 < 1) {
          // coincident nodes push apart along a fixed direction
          dx = 1;
          dy = 0.5;
          d2 = 1.25;
        }
        const f = REPULSION / d2;
        const d = Math.sqrt(d2);
        fx[i] += (f * dx) / d;
        fy[i] += (f * dy) / d;
        fx[j] -= (f * dx) / d;
        fy[j] -= (f * dy) / d;
      }
      fx[i] += (cx - xs[i]) * CENTER_PULL;
      fy[i] += (cy - ys[i]) * CENTER_PULL;
    }
    for (const [a, b] of edges) {
      const dx = xs[b] - xs[a];
      const dy = ys[b] - ys[a];
      const d = Math.max(Math.sqrt(dx * dx + dy * dy), 1e-6);
      const f = SPRING_K * (d - SPRING_LENGTH);
      fx[a] += (f * dx) / d;
      fy[a] += (f * dy) / d;
      fx[b] -= (f * dx) / d;
      fy[b] -= (f * dy) / d;
    }
    const cool = STEP * (1 - it / iterations);
    for (let i = 0; i < n; i++) {
      if (anchored.has(i)) continue; // roots are fixed hubs
      xs[i] += Math.max(-12, Math.min(12, fx[i] * cool));
      ys[i] += Math.max(-12, Math.min(12, fy[i] * cool));
      xs[i] = Math.max(PADDING, Math.min(width - PADDING, xs[i]));
      ys[i] = Math.max(PADDING, Math.min(height - PADDING, ys[i]));
    }
  }

  const out = new Map<string, Point>();
  for (let i = 0; i < n; i++) out.set(names[i], { x: xs[i], y: ys[i] });
  return out;
}
