// DOM wiring for the editor: palette, SVG canvas, inspector, and the
// training panel. All graph semantics (shapes, compatibility) come from the
// service; this layer only draws state and forwards edits.

import { ApiClient, ApiError } from "./api.js";
import { checkAttributes, defaultAttributes, paletteFromCatalog,
         type PaletteEntry } from "./catalog.js";
import { LossChart } from "./chart.js";
import { DocumentError } from "./document.js";
import { LossPoller } from "./poller.js";
import { PRESETS, XOR_CSV, XOR_TRAIN_SETTINGS } from "./presets.js";
import { EditorState, type PlacedNode } from "./state.js";
import type { AttrValue, JobRecord, LossRow, TrainSettings } from "./types.js";
import { LiveValidator } from "./validate.js";

const SERVICE_URL = (window as unknown as { CAPSFORGE_URL?: string })
  .CAPSFORGE_URL ?? "http://127.0.0.1:8787";

const NODE_W = 132;
const NODE_H = 54;

type WireDraft = { tail: string; kind: string } | null;

class App {
  api = new ApiClient(SERVICE_URL);
  state = new EditorState();
  validator = new LiveValidator(this.api, this.state, () => this.render());
  palette: PaletteEntry[] = [];
  wireDraft: WireDraft = null;
  poller: LossPoller | null = null;
  chart: LossChart;

  private $ = (id: string) => document.getElementById(id)!;

  constructor() {
    this.chart = new LossChart(this.$("loss-chart") as HTMLCanvasElement);
  }

  async boot() {
    try {
      const catalog = await this.api.symbols();
      this.palette = paletteFromCatalog(catalog);
      this.$("offline-banner").hidden = true;
    } catch {
      this.$("offline-banner").hidden = false;
      this.$("offline-banner").textContent =
        `service unreachable at ${SERVICE_URL}; start it with: capsforge serve`;
    }
    this.renderPalette();
    this.bindToolbar();
    this.bindTrainPanel();
    this.loadPreset(PRESETS[0].text);
  }

  touch() {
    this.validator.schedule();
    this.render();
  }

  // --- palette -------------------------------------------------------------

  renderPalette() {
    const host = this.$("palette");
    host.innerHTML = "";
    for (const entry of this.palette) {
      const btn = document.createElement("button");
      btn.className = `palette-entry ${entry.category}`;
      btn.textContent = entry.label;
      btn.title = entry.schema.map((a) => a.name).join(", ") || "no attributes";
      if (entry.category === "capsule") {
        btn.onclick = () => {
          const attrs = defaultAttributes(entry.schema);
          const id = this.state.freshId(
            entry.name.startsWith("data") ? "x" : "n");
          this.state.addNode(entry.name, attrs,
                             60 + 40 * this.state.nodes.length, 100, id);
          this.state.selection = { type: "node", id };
          this.touch();
        };
      } else {
        btn.onclick = () => {
          this.wireDraft = this.wireDraft?.kind === entry.name
            ? null : { tail: "", kind: entry.name };
          this.render();
        };
      }
      host.appendChild(btn);
    }
  }

  // --- canvas ----------------------------------------------------------------

  render() {
    const svg = this.$("canvas") as unknown as SVGSVGElement;
    svg.innerHTML = `
      <defs>
        <marker id="arrow" markerWidth="8" markerHeight="8" refX="7" refY="3"
                orient="auto"><path d="M0,0 L7,3 L0,6 z" fill="#8fa3bf"/></marker>
        <marker id="arrow-bad" markerWidth="8" markerHeight="8" refX="7"
                refY="3" orient="auto"><path d="M0,0 L7,3 L0,6 z" fill="#e46a6a"/></marker>
      </defs>`;
    const report = this.state.diagnostics.report;
    for (const wire of this.state.wires) {
      const a = this.state.node(wire.tail);
      const b = this.state.node(wire.head);
      if (!a || !b) continue;
      const bad = this.state.issuesFor(
        { type: "wire", tail: wire.tail, head: wire.head }).length > 0;
      const selected = this.state.selection?.type === "wire"
        && this.state.selection.tail === wire.tail
        && this.state.selection.head === wire.head;
      const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
      const x1 = a.x + NODE_W, y1 = a.y + NODE_H / 2;
      const x2 = b.x, y2 = b.y + NODE_H / 2;
      const mx = (x1 + x2) / 2;
      path.setAttribute("d", `M${x1},${y1} C${mx},${y1} ${mx},${y2} ${x2},${y2}`);
      path.setAttribute("class",
        `wire${bad ? " bad" : ""}${selected ? " selected" : ""}`);
      path.setAttribute("marker-end", bad ? "url(#arrow-bad)" : "url(#arrow)");
      const issues = this.state.issuesFor(
        { type: "wire", tail: wire.tail, head: wire.head });
      const tip = document.createElementNS("http://www.w3.org/2000/svg", "title");
      tip.textContent = issues.length
        ? issues.map((i) => i.message).join("\n") : wire.kind;
      path.appendChild(tip);
      path.onclick = (ev) => {
        ev.stopPropagation();
        this.state.selection = { type: "wire", tail: wire.tail, head: wire.head };
        this.render();
      };
      svg.appendChild(path);
    }
    for (const node of this.state.nodes) {
      svg.appendChild(this.renderNode(node, report?.shapes?.[node.id]));
    }
    this.renderStatus();
    this.renderInspector();
  }

  renderNode(node: PlacedNode, shape?: number[]): SVGGElement {
    const g = document.createElementNS("http://www.w3.org/2000/svg", "g");
    g.setAttribute("transform", `translate(${node.x},${node.y})`);
    const bad = this.state.issuesFor({ type: "node", id: node.id }).length > 0;
    const selected = this.state.selection?.type === "node"
      && this.state.selection.id === node.id;
    const rect = document.createElementNS("http://www.w3.org/2000/svg", "rect");
    rect.setAttribute("width", String(NODE_W));
    rect.setAttribute("height", String(NODE_H));
    rect.setAttribute("rx", "8");
    rect.setAttribute("class",
      `node ${node.kind.startsWith("data") ? "data" : "caps"}` +
      `${bad ? " bad" : ""}${selected ? " selected" : ""}` +
      `${this.wireDraft && this.wireDraft.tail === node.id ? " wiring" : ""}`);
    g.appendChild(rect);
    const label = document.createElementNS("http://www.w3.org/2000/svg", "text");
    label.setAttribute("x", "8");
    label.setAttribute("y", "20");
    label.setAttribute("class", "node-label");
    label.textContent = node.id;
    g.appendChild(label);
    const sub = document.createElementNS("http://www.w3.org/2000/svg", "text");
    sub.setAttribute("x", "8");
    sub.setAttribute("y", "38");
    sub.setAttribute("class", "node-sub");
    sub.textContent = node.kind + (shape ? ` → ${shape.join("×")}` : "");
    g.appendChild(sub);
    const tip = document.createElementNS("http://www.w3.org/2000/svg", "title");
    const issues = this.state.issuesFor({ type: "node", id: node.id });
    tip.textContent = issues.length
      ? issues.map((i) => i.message).join("\n")
      : shape ? `output shape ${shape.join("×")}` : node.kind;
    g.appendChild(tip);

    g.onclick = (ev) => {
      ev.stopPropagation();
      if (this.wireDraft) {
        if (!this.wireDraft.tail) {
          this.wireDraft.tail = node.id;
          this.render();
          return;
        }
        try {
          this.state.connect(this.wireDraft.tail, node.id, this.wireDraft.kind);
          this.state.selection =
            { type: "wire", tail: this.wireDraft.tail, head: node.id };
        } catch (e) {
          this.flash((e as Error).message);
        }
        this.wireDraft = null;
        this.touch();
        return;
      }
      this.state.selection = { type: "node", id: node.id };
      this.render();
    };
    g.onpointerdown = (ev) => {
      if (this.wireDraft) return;
      const startX = ev.clientX - node.x;
      const startY = ev.clientY - node.y;
      const move = (e: PointerEvent) => {
        this.state.moveNode(node.id, e.clientX - startX, e.clientY - startY);
        this.render();
      };
      const up = () => {
        window.removeEventListener("pointermove", move);
        window.removeEventListener("pointerup", up);
      };
      window.addEventListener("pointermove", move);
      window.addEventListener("pointerup", up);
    };
    return g;
  }

  renderStatus() {
    const report = this.state.diagnostics.report;
    const badge = this.$("status");
    if (!report) {
      badge.textContent = "not validated yet";
      badge.className = "status";
      return;
    }
    const stale = this.state.diagnostics.stale ? " (stale)" : "";
    if (report.valid) {
      badge.textContent = `valid · ${report.classification}${stale}`;
      badge.className = "status ok" + (stale ? " stale" : "");
    } else {
      const n = report.errors?.length ?? 0;
      badge.textContent = `${n} problem${n === 1 ? "" : "s"}${stale}`;
      badge.className = "status bad" + (stale ? " stale" : "");
    }
    (this.$("btn-train") as HTMLButtonElement).disabled =
      !(report.valid && !this.state.diagnostics.stale);
  }

  // --- inspector ----------------------------------------------------------------

  renderInspector() {
    const host = this.$("inspector");
    host.innerHTML = "";
    const sel = this.state.selection;
    if (!sel) {
      host.innerHTML = "<p class='hint'>Select a capsule or a wire.</p>";
      return;
    }
    if (sel.type === "node") {
      const node = this.state.node(sel.id);
      if (!node) return;
      const entry = this.palette.find((p) => p.name === node.kind);
      host.appendChild(this.heading(`${node.id} · ${node.kind}`, () => {
        this.state.removeNode(node.id);
        this.touch();
      }));
      if (entry) this.attrForm(host, entry, node.attributes, (name, value) => {
        this.state.setNodeAttribute(node.id, name, value);
        this.touch();
      });
    } else {
      const wire = this.state.wire(sel.tail, sel.head);
      if (!wire) return;
      const entry = this.palette.find((p) => p.name === wire.kind);
      host.appendChild(this.heading(
        `${wire.tail} → ${wire.head} · ${wire.kind}`, () => {
          this.state.removeWire(wire.tail, wire.head);
          this.touch();
        }));
      if (entry) this.attrForm(host, entry, wire.attributes, (name, value) => {
        this.state.setWireAttribute(wire.tail, wire.head, name, value);
        this.touch();
      });
    }
    const issues = this.state.issuesFor(sel);
    if (issues.length) {
      const list = document.createElement("ul");
      list.className = "issues";
      for (const issue of issues) {
        const li = document.createElement("li");
        li.textContent = `${issue.code}: ${issue.message}`;
        list.appendChild(li);
      }
      host.appendChild(list);
    }
  }

  heading(text: string, onDelete: () => void): HTMLElement {
    const div = document.createElement("div");
    div.className = "inspector-head";
    const h = document.createElement("h3");
    h.textContent = text;
    const del = document.createElement("button");
    del.textContent = "delete";
    del.onclick = onDelete;
    div.append(h, del);
    return div;
  }

  attrForm(host: HTMLElement, entry: PaletteEntry,
           attrs: Record<string, AttrValue>,
           onChange: (name: string, value: AttrValue) => void) {
    const problems = checkAttributes(entry.schema, attrs);
    for (const schema of entry.schema) {
      const row = document.createElement("label");
      row.className = "attr-row";
      row.textContent = schema.name + (schema.required ? " *" : "");
      let input: HTMLInputElement | HTMLSelectElement;
      if (schema.type === "dtype") {
        input = document.createElement("select");
        for (const choice of schema.choices ?? []) {
          const opt = document.createElement("option");
          opt.value = choice;
          opt.textContent = choice;
          input.appendChild(opt);
        }
        input.value = String(attrs[schema.name] ?? schema.default ?? "");
        input.onchange = () => onChange(schema.name, input.value);
      } else {
        input = document.createElement("input");
        const current = attrs[schema.name];
        input.value = Array.isArray(current)
          ? current.join("x") : String(current ?? "");
        input.placeholder = schema.type === "int_pair" ? "2x2" : schema.type;
        input.onchange = () => {
          if (schema.type === "int_pair") {
            const parts = input.value.split(/[x,]/).map((s) => parseInt(s, 10));
            onChange(schema.name, parts as AttrValue);
          } else {
            const n = Number(input.value);
            onChange(schema.name, Number.isNaN(n) ? input.value : n);
          }
        };
      }
      const problem = problems.find((p) => p.name === schema.name);
      if (problem) {
        row.classList.add("bad");
        row.title = problem.message;
      }
      row.appendChild(input);
      host.appendChild(row);
    }
  }

  // --- toolbar --------------------------------------------------------------------

  bindToolbar() {
    const presetSelect = this.$("preset-select") as HTMLSelectElement;
    for (const preset of PRESETS) {
      const opt = document.createElement("option");
      opt.value = preset.name;
      opt.textContent = preset.label;
      presetSelect.appendChild(opt);
    }
    presetSelect.onchange = () => {
      const preset = PRESETS.find((p) => p.name === presetSelect.value);
      if (preset) this.loadPreset(preset.text);
    };
    this.$("btn-export").onclick = () => {
      const blob = new Blob([this.state.exportText()],
                            { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `${this.state.metadata.name ?? "graph"}.json`;
      a.click();
      URL.revokeObjectURL(a.href);
    };
    const fileInput = this.$("import-file") as HTMLInputElement;
    this.$("btn-import").onclick = () => fileInput.click();
    fileInput.onchange = async () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      const text = await file.text();
      try {
        this.state.importText(text);
        this.flash(`imported ${file.name}`);
      } catch (e) {
        const msg = e instanceof DocumentError ? e.message : String(e);
        this.flash(`import failed — ${msg}`, true);
        return; // state untouched on failure
      } finally {
        fileInput.value = "";
      }
      this.touch();
    };
  }

  loadPreset(text: string) {
    this.state.importText(text);
    this.wireDraft = null;
    this.touch();
  }

  flash(message: string, isError = false) {
    const el = this.$("flash");
    el.textContent = message;
    el.className = isError ? "flash error" : "flash";
    el.hidden = false;
    setTimeout(() => { el.hidden = true; }, 4000);
  }

  // --- training ---------------------------------------------------------------------

  bindTrainPanel() {
    const panel = this.$("train-panel");
    this.$("btn-train").onclick = () => {
      panel.hidden = !panel.hidden;
    };
    const lr = this.$("cfg-lr") as HTMLInputElement;
    const iters = this.$("cfg-iters") as HTMLInputElement;
    const loss = this.$("cfg-loss") as HTMLSelectElement;
    const seed = this.$("cfg-seed") as HTMLInputElement;
    const data = this.$("cfg-data") as HTMLTextAreaElement;
    lr.value = String(XOR_TRAIN_SETTINGS.learning_rate);
    iters.value = String(XOR_TRAIN_SETTINGS.max_iter);
    loss.value = XOR_TRAIN_SETTINGS.loss;
    seed.value = String(XOR_TRAIN_SETTINGS.seed);
    data.value = XOR_CSV;

    this.$("btn-run").onclick = () => void this.runTraining();
  }

  readSettings(): TrainSettings | null {
    const lr = Number((this.$("cfg-lr") as HTMLInputElement).value);
    const iters = Number((this.$("cfg-iters") as HTMLInputElement).value);
    const loss = (this.$("cfg-loss") as HTMLSelectElement).value as
      TrainSettings["loss"];
    const seed = Number((this.$("cfg-seed") as HTMLInputElement).value);
    const problem = this.$("cfg-problem");
    problem.textContent = "";
    if (!(lr > 0)) {
      problem.textContent = "learning rate must be positive";
      return null;
    }
    if (!Number.isInteger(iters) || iters < 1) {
      problem.textContent = "iterations must be a positive integer";
      return null;
    }
    return { learning_rate: lr, max_iter: iters, loss,
             seed: Number.isInteger(seed) ? seed : 0 };
  }

  async runTraining() {
    const settings = this.readSettings();
    if (!settings) return;
    const csv = (this.$("cfg-data") as HTMLTextAreaElement).value;
    const jobStatus = this.$("job-status");
    this.poller?.stop();
    try {
      const id = await this.api.submitJob(this.state.toDocument(), settings, csv);
      jobStatus.textContent = `job ${id}: submitted`;
      const rows: LossRow[] = [];
      this.poller = new LossPoller(this.api, id, {
        onRows: (fresh) => {
          rows.push(...fresh);
          this.chart.draw(rows);
        },
        onState: (record) => {
          jobStatus.textContent = `job ${id}: ${record.state}`;
        },
        onDone: (record) => this.showJobResult(record),
        onRetry: (_attempt, delay) => {
          jobStatus.textContent = `job ${id}: connection lost, retrying in ` +
            `${Math.round(delay / 1000)}s`;
        },
      });
      await this.poller.run();
    } catch (e) {
      if (e instanceof ApiError) {
        this.$("cfg-problem").textContent = e.detail;
      } else {
        jobStatus.textContent = String(e);
      }
    }
  }

  showJobResult(record: JobRecord) {
    const jobStatus = this.$("job-status");
    if (record.state === "failed") {
      jobStatus.textContent = `job ${record.id}: failed — ${record.error}`;
      return;
    }
    const metrics = record.metrics;
    const accuracy = metrics?.accuracy !== undefined
      ? ` · accuracy ${metrics.correct}/${metrics.classified}` : "";
    jobStatus.innerHTML = "";
    jobStatus.textContent =
      `job ${record.id}: finished · final loss ${record.final_loss}` + accuracy;
    const link = document.createElement("a");
    link.href = this.api.checkpointUrl(record.id);
    link.textContent = "download checkpoint";
    link.className = "checkpoint-link";
    jobStatus.append(" · ", link);
  }
}

window.addEventListener("DOMContentLoaded", () => {
  void new App().boot();
});
