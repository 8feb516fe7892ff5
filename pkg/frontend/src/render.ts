import { ConfidencePanel, DatasetDescriptor, Recommendation } from './api';
import { CompareRow, ExplorerStore, METHODS, PanelState, SortKey } from './store';

// Numbers are shown exactly as the wire carried them. Rounding or otherwise
// reshaping them here would put numbers on screen the service never sent.
export function fmt(value: number | null | undefined): string {
  if (value === null || value === undefined) return '—';
  return String(value);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

// ---------------------------------------------------------------------------
// causal graph panel

const SVG_NS = 'http://www.w3.org/2000/svg';

function nodeDepths(descriptor: DatasetDescriptor): Map<string, number> {
  const nodes = [...descriptor.covariates, descriptor.target];
  const depth = new Map(nodes.map((n) => [n, 0]));
  // longest-path layering; the graphs are small DAGs so a few sweeps settle
  for (let sweep = 0; sweep < nodes.length; sweep++) {
    let moved = false;
    for (const [from, to] of descriptor.edges) {
      const want = (depth.get(from) ?? 0) + 1;
      if ((depth.get(to) ?? 0) < want) {
        depth.set(to, want);
        moved = true;
      }
    }
    if (!moved) break;
  }
  return depth;
}

/**
 * Inline SVG of the causal DAG. Causes of the outcome get the highlight
 * class so it is visible why improvement methods restrict the toggles to
 * them; the outcome node is marked separately.
 */
export function renderDag(descriptor: DatasetDescriptor): SVGSVGElement {
  const depth = nodeDepths(descriptor);
  const columns = new Map<number, string[]>();
  for (const [node, d] of depth) {
    const column = columns.get(d) ?? [];
    column.push(node);
    columns.set(d, column);
  }
  const colWidth = 110;
  const rowHeight = 56;
  const radius = 17;
  const tallest = Math.max(...[...columns.values()].map((c) => c.length));
  const width = colWidth * columns.size + 20;
  const height = rowHeight * tallest + 20;
  const pos = new Map<string, { x: number; y: number }>();
  for (const [d, nodesAt] of columns) {
    nodesAt.sort();
    nodesAt.forEach((node, i) => {
      const lead = (tallest - nodesAt.length) / 2;
      pos.set(node, {
        x: 30 + d * colWidth,
        y: 30 + (lead + i) * rowHeight,
      });
    });
  }

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('class', 'dag');
  const defs = document.createElementNS(SVG_NS, 'defs');
  defs.innerHTML =
    '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ' +
    'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
    '<path d="M 0 0 L 10 5 L 0 10 z"/></marker>';
  svg.append(defs);

  for (const [from, to] of descriptor.edges) {
    const a = pos.get(from);
    const b = pos.get(to);
    if (!a || !b) continue;
    const dx = b.x - a.x;
    const dy = b.y - a.y;
    const len = Math.hypot(dx, dy) || 1;
    const line = document.createElementNS(SVG_NS, 'line');
    line.setAttribute('x1', String(a.x + (dx / len) * radius));
    line.setAttribute('y1', String(a.y + (dy / len) * radius));
    line.setAttribute('x2', String(b.x - (dx / len) * (radius + 3)));
    line.setAttribute('y2', String(b.y - (dy / len) * (radius + 3)));
    line.setAttribute('class', 'dag-edge');
    line.setAttribute('marker-end', 'url(#arrow)');
    svg.append(line);
  }

  for (const node of [...descriptor.covariates, descriptor.target]) {
    const at = pos.get(node)!;
    const group = document.createElementNS(SVG_NS, 'g');
    const kind =
      node === descriptor.target
        ? 'dag-target'
        : descriptor.causes.includes(node)
          ? 'dag-cause'
          : 'dag-plain';
    group.setAttribute('class', `dag-node ${kind}`);
    group.setAttribute('data-node', node);
    const circle = document.createElementNS(SVG_NS, 'circle');
    circle.setAttribute('cx', String(at.x));
    circle.setAttribute('cy', String(at.y));
    circle.setAttribute('r', String(radius));
    const label = document.createElementNS(SVG_NS, 'text');
    label.setAttribute('x', String(at.x));
    label.setAttribute('y', String(at.y + 4));
    label.setAttribute('text-anchor', 'middle');
    label.textContent = node;
    group.append(circle, label);
    svg.append(group);
  }
  return svg;
}

// ---------------------------------------------------------------------------
// draft controls

function valueControl(
  store: ExplorerStore,
  node: string,
  value: number,
): HTMLElement {
  const descriptor = store.state.descriptor!;
  const domain = descriptor.domains[node];
  if (domain.kind === 'continuous') {
    const step = String(10 ** -descriptor.value_decimals);
    const input = el('input', {
      type: 'number',
      step,
      value: String(value),
      id: `value-${node}`,
      'data-value-for': node,
    });
    if (domain.low !== undefined) input.setAttribute('min', String(domain.low));
    if (domain.high !== undefined) input.setAttribute('max', String(domain.high));
    input.addEventListener('change', () =>
      store.setValue(node, Number(input.value)),
    );
    return input;
  }
  const levels =
    domain.kind === 'binary'
      ? 2
      : (domain.levels ?? Math.round((domain.high ?? 0) - (domain.low ?? 0)) + 1);
  const select = el('select', { id: `value-${node}`, 'data-value-for': node });
  for (let level = 0; level < levels; level++) {
    const option = el('option', { value: String(level) }, String(level));
    if (level === value) option.selected = true;
    select.append(option);
  }
  select.addEventListener('change', () =>
    store.setValue(node, Number(select.value)),
  );
  return select;
}

export function renderDraft(store: ExplorerStore): HTMLElement {
  const { descriptor, session, draft, focusMethod } = store.state;
  const box = el('section', { class: 'draft', 'data-panel': 'draft' });
  if (!descriptor || !session) return box;
  box.append(el('h2', {}, 'Candidate action'));
  const improvementMode = focusMethod.startsWith('ICR');
  for (const node of descriptor.actionable) {
    const entry = draft.get(node)!;
    const isCause = descriptor.causes.includes(node);
    const rowClass = [
      'draft-row',
      entry.enabled ? 'enabled' : '',
      improvementMode && !isCause ? 'non-cause-flagged' : '',
    ]
      .filter(Boolean)
      .join(' ');
    const toggle = el('input', {
      type: 'checkbox',
      id: `toggle-${node}`,
      'data-toggle-for': node,
    });
    toggle.checked = entry.enabled;
    toggle.addEventListener('change', () =>
      store.setToggle(node, toggle.checked),
    );
    const row = el(
      'div',
      { class: rowClass, 'data-draft-row': node },
      toggle,
      el('label', { for: `toggle-${node}` }, `set ${node}`),
      valueControl(store, node, entry.value),
      el(
        'span',
        { class: 'factual-hint' },
        `now ${fmt(session.factual[node])}`,
      ),
    );
    if (improvementMode && !isCause) {
      row.append(
        el(
          'span',
          { class: 'non-cause-note', title: 'not a cause of the outcome' },
          'not a cause',
        ),
      );
    }
    box.append(row);
  }
  const preview = el(
    'div',
    { class: 'cost-preview' },
    `cost preview: ${store.costPreview()}`,
  );
  const clear = el('button', { type: 'button', id: 'clear-draft' }, 'clear');
  clear.addEventListener('click', () => store.clearDraft());
  box.append(preview, clear);
  return box;
}

// ---------------------------------------------------------------------------
// confidence panel

const PANEL_FIELDS: [keyof ConfidencePanel, string][] = [
  ['cost', 'cost of the action'],
  ['gamma_ind', 'improvement confidence, this individual'],
  ['gamma_sub', 'improvement confidence, matching subgroup'],
  ['eta_under_h', 'acceptance by the deployed model'],
  ['eta_under_h_ind', 'acceptance after individualized rescoring'],
  ['acceptance_bound', 'guaranteed acceptance floor'],
];

export function renderPanel(store: ExplorerStore): HTMLElement {
  const { panel, session } = store.state;
  const box = el('section', { class: 'panel', 'data-panel': 'confidence' });
  box.append(el('h2', {}, 'What the numbers say'));
  if (!session) return box;
  if (panel.kind === 'idle') {
    box.append(
      el(
        'p',
        { class: 'baseline', 'data-field': 'baseline' },
        `no action toggled; the deployed model scores this individual at ${fmt(session.score)} against threshold ${fmt(session.threshold)}`,
      ),
    );
    return box;
  }
  if (panel.kind === 'evaluating') {
    box.append(el('p', { class: 'pending' }, 'evaluating…'));
    return box;
  }
  if (panel.kind === 'error') {
    box.append(
      el('p', { class: 'error-inline', 'data-field': 'error' }, panel.message),
    );
    return box;
  }
  const data = panel.panel;
  if (data.gamma_sub_is_observational) {
    box.append(
      el(
        'p',
        { class: 'banner not-a-cause', 'data-banner': 'not-a-cause' },
        'this action touches no cause of the outcome, so the improvement readings are plain observational scores',
      ),
    );
  }
  const list = el('dl', { class: 'panel-grid' });
  for (const [field, label] of PANEL_FIELDS) {
    list.append(
      el('dt', {}, label),
      el(
        'dd',
        { 'data-field': field },
        fmt(data[field] as number | null),
      ),
    );
  }
  box.append(list);
  return box;
}

// ---------------------------------------------------------------------------
// comparison table

const COMPARE_COLUMNS: [SortKey, string][] = [
  ['cost', 'cost'],
  ['gamma', 'improvement confidence'],
  ['eta', 'acceptance'],
];

function actionSummary(rec: Recommendation): string {
  const parts = Object.entries(rec.action).map(
    ([node, theta]) => `${node} → ${fmt(theta)}`,
  );
  return parts.length > 0 ? parts.join(', ') : 'no change';
}

export function renderCompare(store: ExplorerStore): HTMLElement {
  const box = el('section', { class: 'compare', 'data-panel': 'compare' });
  box.append(el('h2', {}, 'Compare recommendations'));
  if (!store.state.session) return box;

  const controls = el('div', { class: 'compare-controls' });
  const confidence = el('input', {
    type: 'number',
    id: 'compare-confidence',
    min: '0.5',
    max: '0.99',
    step: '0.01',
    value: String(store.state.compareConfidence),
  });
  const run = el('button', { type: 'button', id: 'run-compare' }, 'request all');
  run.addEventListener('click', () => {
    void store.runCompare(METHODS, Number(confidence.value));
  });
  controls.append(
    el('label', { for: 'compare-confidence' }, 'target confidence'),
    confidence,
    run,
  );
  box.append(controls);
  if (store.state.compare.length === 0) return box;

  const head = el('tr', {}, el('th', {}, 'method'), el('th', {}, 'action'));
  for (const [key, label] of COMPARE_COLUMNS) {
    const button = el(
      'button',
      { type: 'button', 'data-sort': key },
      label + (store.state.sortKey === key ? (store.state.sortDir === 1 ? ' ▲' : ' ▼') : ''),
    );
    button.addEventListener('click', () => store.setSort(key));
    head.append(el('th', {}, button));
  }
  head.append(el('th', {}, 'floor'), el('th', {}, 'status'));

  const body = el('tbody', {});
  for (const row of store.sortedCompare()) {
    body.append(renderCompareRow(row));
  }
  const table = el('table', { class: 'compare-table' });
  table.append(el('thead', {}, head), body);
  box.append(table);

  const chosen = store
    .sortedCompare()
    .find((r) => r.status === 'ready' && r.rec?.guarantee);
  if (chosen?.rec?.guarantee) {
    box.append(
      el('p', { class: 'guarantee', 'data-field': 'guarantee' }, chosen.rec.guarantee),
    );
  }
  return box;
}

function renderCompareRow(row: CompareRow): HTMLElement {
  const tr = el('tr', { 'data-method': row.method });
  tr.append(el('td', {}, row.method));
  if (row.status === 'pending') {
    tr.className = 'pending';
    tr.append(el('td', { colspan: '5' }, '…'), el('td', {}, 'pending'));
    return tr;
  }
  if (row.status === 'error' || !row.rec) {
    tr.className = 'failed';
    tr.append(
      el('td', { colspan: '5' }, row.message ?? 'failed'),
      el('td', {}, 'error'),
    );
    return tr;
  }
  const rec = row.rec;
  if (!rec.feasible) tr.className = 'infeasible';
  tr.append(
    el('td', {}, actionSummary(rec)),
    el('td', { 'data-cell': 'cost' }, fmt(rec.cost)),
    el('td', { 'data-cell': 'gamma' }, fmt(rec.gamma_ind)),
    el('td', { 'data-cell': 'eta' }, fmt(rec.eta_under_h)),
    el('td', { 'data-cell': 'bound' }, fmt(rec.acceptance_bound)),
    rec.feasible
      ? el('td', {}, 'ok')
      : el(
          'td',
          { class: 'violation', 'data-cell': 'violation' },
          `infeasible, short by ${fmt(rec.violation)}`,
        ),
  );
  return tr;
}

// ---------------------------------------------------------------------------
// session setup and app shell

function renderSessionSetup(store: ExplorerStore): HTMLElement {
  const { datasets, descriptor, session, busy } = store.state;
  const box = el('section', { class: 'setup', 'data-panel': 'setup' });
  const picker = el('select', { id: 'dataset-picker' });
  picker.append(el('option', { value: '' }, 'pick a dataset'));
  for (const d of datasets) {
    const option = el('option', { value: d.name }, d.name);
    if (descriptor?.name === d.name) option.selected = true;
    picker.append(option);
  }
  picker.addEventListener('change', () => {
    if (picker.value) store.chooseDataset(picker.value);
  });
  box.append(el('label', { for: 'dataset-picker' }, 'dataset'), picker);
  if (!descriptor) return box;

  box.append(el('p', { class: 'dataset-blurb' }, descriptor.description));
  const draw = el(
    'button',
    { type: 'button', id: 'draw-factual' },
    'draw a rejected individual',
  );
  if (busy) draw.setAttribute('disabled', '');
  draw.addEventListener('click', () => void store.startSession());
  box.append(draw);

  const manual = el('form', { class: 'manual-factual', id: 'manual-factual' });
  for (const node of descriptor.covariates) {
    manual.append(
      el('label', { for: `factual-${node}` }, node),
      el('input', {
        type: 'number',
        step: 'any',
        id: `factual-${node}`,
        'data-factual-for': node,
        value: session ? String(session.factual[node]) : '',
      }),
    );
  }
  const use = el('button', { type: 'submit' }, 'use this factual');
  manual.append(use);
  manual.addEventListener('submit', (event) => {
    event.preventDefault();
    const factual: Record<string, number> = {};
    for (const node of descriptor.covariates) {
      const input = manual.querySelector<HTMLInputElement>(
        `[data-factual-for="${node}"]`,
      );
      factual[node] = Number(input?.value ?? NaN);
    }
    void store.startSession(factual);
  });
  box.append(manual);

  if (session) {
    const pairs = Object.entries(session.factual)
      .map(([k, v]) => `${k} = ${fmt(v)}`)
      .join(', ');
    box.append(
      el(
        'p',
        { class: 'factual-line', 'data-field': 'factual' },
        `session ${session.id.slice(0, 8)}: ${pairs} (score ${fmt(session.score)})`,
      ),
    );
  }
  return box;
}

export function renderApp(root: HTMLElement, store: ExplorerStore): void {
  const state = store.state;
  root.textContent = '';
  root.append(el('h1', {}, 'recourse explorer'));

  if (state.unreachable) {
    const retry = el('button', { type: 'button', id: 'retry' }, 'retry');
    retry.addEventListener('click', () => store.retry());
    root.append(
      el(
        'div',
        { class: 'banner unreachable', 'data-banner': 'unreachable' },
        'the recourse service is unreachable ',
        retry,
      ),
    );
  }
  if (state.banner) {
    root.append(
      el('div', { class: 'banner inline-error', 'data-banner': 'inline' }, state.banner),
    );
  }

  root.append(renderSessionSetup(store));

  if (state.descriptor) {
    const focus = el('div', { class: 'focus-method' });
    const select = el('select', { id: 'focus-method' });
    for (const method of METHODS) {
      const option = el('option', { value: method }, method);
      if (state.focusMethod === method) option.selected = true;
      select.append(option);
    }
    select.addEventListener('change', () => store.setFocusMethod(select.value));
    focus.append(el('label', { for: 'focus-method' }, 'working toward'), select);
    const main = el(
      'div',
      { class: 'columns' },
      el('div', { class: 'col' }, renderDag(state.descriptor), focus, renderDraft(store)),
      el('div', { class: 'col' }, renderPanel(store), renderCompare(store)),
    );
    root.append(main);
  }
}
