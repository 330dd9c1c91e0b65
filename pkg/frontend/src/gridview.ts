/**
 * SVG rendering of the grid graph with per-node violation badges.
 */

import { fmtP } from './format.js';
import type { Point } from './layout.js';
import type { Badge } from './state.js';
import type { Topology } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

const NODE_RADIUS: Record<string, number> = {
  substation: 16,
  feeder: 11,
  voltage_point: 7,
};

export interface GridViewOptions {
  topo: Topology;
  positions: Map<string, Point>;
  badges: Map<string, Badge>;
  selected: string | null;
  width: number;
  height: number;
  onSelect: (entity: string) => void;
}

function el(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

export function renderGridView(
  container: HTMLElement,
  opts: GridViewOptions,
): void {
  container.textContent = '';
  const svg = el('svg', {
    viewBox: `0 0 ${opts.width} ${opts.height}`,
    class: 'grid-svg',
  });

  for (const node of opts.topo.nodes) {
    if (node.parent === null) continue;
    const a = opts.positions.get(node.name);
    const b = opts.positions.get(node.parent);
    if (!a || !b) continue;
    svg.appendChild(
      el('line', {
        x1: String(a.x),
        y1: String(a.y),
        x2: String(b.x),
        y2: String(b.y),
        class: 'grid-edge',
      }),
    );
  }

  for (const node of opts.topo.nodes) {
    const p = opts.positions.get(node.name);
    if (!p) continue;
    const r = NODE_RADIUS[node.kind] ?? 8;
    const group = el('g', {
      class: `grid-node kind-${node.kind}`
        + (opts.selected === node.name ? ' selected' : ''),
      'data-entity': node.name,
    });
    group.appendChild(
      el('circle', { cx: String(p.x), cy: String(p.y), r: String(r) }),
    );
    const label = el('text', {
      x: String(p.x),
      y: String(p.y + r + 12),
      class: 'grid-label',
    });
    label.textContent = node.name;
    group.appendChild(label);

    const badge = opts.badges.get(node.name);
    if (badge) {
      const bx = p.x + r * 0.9;
      const by = p.y - r * 0.9;
      group.appendChild(
        el('circle', {
          cx: String(bx),
          cy: String(by),
          r: '9',
          class: `violation-badge bound-${badge.bound}`,
        }),
      );
      const txt = el('text', {
        x: String(bx),
        y: String(by - 12),
        class: 'badge-text',
        'data-badge-for': node.name,
      });
      txt.textContent = `p ${fmtP(badge.worstP)}`;
      group.appendChild(txt);
    }

    group.addEventListener('click', () => opts.onSelect(node.name));
    svg.appendChild(group);
  }

  container.appendChild(svg);
}
