import {
  ApiError,
  ConfidencePanel,
  DatasetDescriptor,
  Recommendation,
  RecourseApi,
  ServerUnreachableError,
  SessionInfo,
} from './api';

export const METHODS = ['CE', 'CR-ind', 'CR-sub', 'ICR-ind', 'ICR-sub'];

export interface DraftEntry {
  enabled: boolean;
  value: number;
}

export type PanelState =
  | { kind: 'idle' }
  | { kind: 'evaluating' }
  | { kind: 'ready'; panel: ConfidencePanel }
  | { kind: 'error'; message: string };

export interface CompareRow {
  method: string;
  status: 'pending' | 'ready' | 'error';
  rec: Recommendation | null;
  message: string | null;
}

export type SortKey = 'cost' | 'gamma' | 'eta';

export interface ExplorerState {
  datasets: DatasetDescriptor[];
  descriptor: DatasetDescriptor | null;
  session: SessionInfo | null;
  draft: Map<string, DraftEntry>;
  panel: PanelState;
  compare: CompareRow[];
  compareConfidence: number;
  sortKey: SortKey;
  sortDir: 1 | -1;
  focusMethod: string;
  unreachable: boolean;
  banner: string | null;
  busy: boolean;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (typeof err.detail === 'string') return err.detail;
    const det = err.detail as { message?: string } | undefined;
    if (det && typeof det.message === 'string') return det.message;
    return `request failed with status ${err.status}`;
  }
  if (err instanceof Error) return err.message;
  return String(err);
}

/**
 * All explorer state plus the request discipline around it: draft edits
 * debounce into a single evaluate call, a newer draft aborts the one in
 * flight, and responses that lost the race are dropped. Every number shown
 * downstream comes out of `panel`, `compare`, or `session`, all of which
 * hold server payloads verbatim; the only client-side arithmetic is the
 * cost preview, which the panel's own cost field supersedes on arrival.
 */
export class ExplorerStore {
  readonly state: ExplorerState = {
    datasets: [],
    descriptor: null,
    session: null,
    draft: new Map(),
    panel: { kind: 'idle' },
    compare: [],
    compareConfidence: 0.85,
    sortKey: 'cost',
    sortDir: 1,
    focusMethod: 'ICR-sub',
    unreachable: false,
    banner: null,
    busy: false,
  };

  private listeners = new Set<() => void>();
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private evaluateSeq = 0;
  private compareSeq = 0;

  constructor(
    private readonly api: RecourseApi,
    private readonly debounceMs = 250,
  ) {}

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify() {
    for (const listener of this.listeners) listener();
  }

  async init(): Promise<void> {
    try {
      this.state.datasets = await this.api.datasets();
      this.state.unreachable = false;
    } catch (err) {
      if (err instanceof ServerUnreachableError) {
        this.state.unreachable = true;
      } else {
        this.state.banner = describeError(err);
      }
    }
    this.notify();
  }

  chooseDataset(name: string) {
    const descriptor = this.state.datasets.find((d) => d.name === name);
    this.state.descriptor = descriptor ?? null;
    this.state.session = null;
    this.state.draft = new Map();
    this.state.panel = { kind: 'idle' };
    this.state.compare = [];
    this.state.banner = null;
    this.cancelPending();
    this.notify();
  }

  /** Create a session; without a factual the server draws a rejected one. */
  async startSession(
    factual?: Record<string, number>,
    seed?: number,
  ): Promise<void> {
    const descriptor = this.state.descriptor;
    if (!descriptor) return;
    this.state.busy = true;
    this.state.banner = null;
    this.notify();
    try {
      const session = await this.api.createSession({
        dataset: descriptor.name,
        factual,
        seed,
      });
      this.state.session = session;
      const draft = new Map<string, DraftEntry>();
      for (const node of descriptor.actionable) {
        draft.set(node, { enabled: false, value: session.factual[node] });
      }
      this.state.draft = draft;
      this.state.panel = { kind: 'idle' };
      this.state.compare = [];
      this.state.unreachable = false;
    } catch (err) {
      if (err instanceof ServerUnreachableError) {
        this.state.unreachable = true;
      } else {
        this.state.banner = describeError(err);
      }
    } finally {
      this.state.busy = false;
    }
    this.notify();
  }

  setToggle(node: string, enabled: boolean) {
    const entry = this.state.draft.get(node);
    if (!entry) return;
    entry.enabled = enabled;
    this.scheduleEvaluate();
    this.notify();
  }

  setValue(node: string, value: number) {
    const entry = this.state.draft.get(node);
    if (!entry || Number.isNaN(value)) return;
    entry.value = this.snap(node, value);
    if (entry.enabled) this.scheduleEvaluate();
    this.notify();
  }

  clearDraft() {
    for (const entry of this.state.draft.values()) entry.enabled = false;
    this.cancelPending();
    this.state.panel = { kind: 'idle' };
    this.notify();
  }

  setFocusMethod(method: string) {
    this.state.focusMethod = method;
    this.notify();
  }

  /** Clamp and grid-snap a control value the same way the server would. */
  private snap(node: string, value: number): number {
    const descriptor = this.state.descriptor;
    if (!descriptor) return value;
    const domain = descriptor.domains[node];
    let v = value;
    if (domain.kind === 'continuous') {
      const scale = 10 ** descriptor.value_decimals;
      v = Math.round(v * scale) / scale;
    } else {
      v = Math.round(v);
    }
    if (domain.low !== undefined) v = Math.max(domain.low, v);
    if (domain.high !== undefined) v = Math.min(domain.high, v);
    return v;
  }

  enabledAction(): Record<string, number> {
    const action: Record<string, number> = {};
    for (const [node, entry] of this.state.draft) {
      if (entry.enabled) action[node] = entry.value;
    }
    return action;
  }

  /** Weighted absolute displacement of the current draft, as a preview. */
  costPreview(): number {
    const { descriptor, session } = this.state;
    if (!descriptor || !session) return 0;
    let total = 0;
    for (const [node, entry] of this.state.draft) {
      if (!entry.enabled) continue;
      const weight = descriptor.cost_weights[node] ?? 1;
      total += weight * Math.abs(entry.value - session.factual[node]);
    }
    return total;
  }

  /** True when the draft touches no cause of the outcome. */
  draftMissesCauses(): boolean {
    const descriptor = this.state.descriptor;
    if (!descriptor) return false;
    const enabled = Object.keys(this.enabledAction());
    return (
      enabled.length > 0 &&
      !enabled.some((node) => descriptor.causes.includes(node))
    );
  }

  private cancelPending() {
    if (this.debounceTimer !== null) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
    }
    if (this.inflight) {
      this.inflight.abort();
      this.inflight = null;
    }
  }

  private scheduleEvaluate() {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    const action = this.enabledAction();
    if (Object.keys(action).length === 0) {
      this.cancelPending();
      this.state.panel = { kind: 'idle' };
      return;
    }
    this.state.panel = { kind: 'evaluating' };
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.fireEvaluate();
    }, this.debounceMs);
  }

  private async fireEvaluate(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    if (this.inflight) this.inflight.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const seq = ++this.evaluateSeq;
    const action = this.enabledAction();
    try {
      const panel = await this.api.evaluate(
        session.id,
        action,
        controller.signal,
      );
      if (seq !== this.evaluateSeq) return; // a newer draft answered already
      this.state.panel = { kind: 'ready', panel };
      this.state.unreachable = false;
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') return;
      if (seq !== this.evaluateSeq) return;
      if (err instanceof ServerUnreachableError) {
        this.state.unreachable = true;
        this.state.panel = { kind: 'error', message: err.message };
      } else {
        // the draft stays exactly as typed; only the panel reports the fault
        this.state.panel = { kind: 'error', message: describeError(err) };
      }
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
    this.notify();
  }

  /** One recommend call per method; rows land as the server answers. */
  async runCompare(methods: string[], confidence: number): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    const seq = ++this.compareSeq;
    this.state.compareConfidence = confidence;
    this.state.compare = methods.map((method) => ({
      method,
      status: 'pending',
      rec: null,
      message: null,
    }));
    this.notify();
    await Promise.all(
      methods.map(async (method) => {
        let row: CompareRow;
        try {
          const rec = await this.api.recommend(session.id, method, confidence);
          row = { method, status: 'ready', rec, message: null };
        } catch (err) {
          if (err instanceof ServerUnreachableError && seq === this.compareSeq) {
            this.state.unreachable = true;
          }
          row = {
            method,
            status: 'error',
            rec: null,
            message: describeError(err),
          };
        }
        if (seq !== this.compareSeq) return; // superseded by a newer run
        const at = this.state.compare.findIndex((r) => r.method === method);
        if (at >= 0) this.state.compare[at] = row;
        this.notify();
      }),
    );
  }

  setSort(key: SortKey) {
    if (this.state.sortKey === key) {
      this.state.sortDir = this.state.sortDir === 1 ? -1 : 1;
    } else {
      this.state.sortKey = key;
      this.state.sortDir = 1;
    }
    this.notify();
  }

  /**
   * Rows in display order: feasible answers sorted by the active column,
   * then infeasible ones (still sorted, greyed by the renderer), then
   * whatever is pending or failed, in request order.
   */
  sortedCompare(): CompareRow[] {
    const value = (row: CompareRow): number => {
      const rec = row.rec;
      if (!rec) return Number.POSITIVE_INFINITY;
      const raw =
        this.state.sortKey === 'cost'
          ? rec.cost
          : this.state.sortKey === 'gamma'
            ? rec.gamma_ind
            : rec.eta_under_h;
      return raw === null ? Number.POSITIVE_INFINITY : raw;
    };
    const bucket = (row: CompareRow): number =>
      row.status === 'ready' ? (row.rec!.feasible ? 0 : 1) : 2;
    return [...this.state.compare].sort((a, b) => {
      const byBucket = bucket(a) - bucket(b);
      if (byBucket !== 0) return byBucket;
      if (bucket(a) === 2) return 0; // keep request order
      return this.state.sortDir * (value(a) - value(b));
    });
  }

  /** Clear the outage flag and take up whatever was interrupted. */
  retry() {
    this.state.unreachable = false;
    this.state.banner = null;
    this.notify();
    if (this.state.datasets.length === 0) {
      void this.init();
      return;
    }
    if (Object.keys(this.enabledAction()).length > 0) {
      this.scheduleEvaluate();
      this.notify();
    }
  }
}
