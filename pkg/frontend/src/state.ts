// Editor state: placed symbols, wires, selection, and the validation overlay.
// The state is the single source the canvas renders from, and it serializes
// losslessly to a GraphDocument (node positions live in document metadata).

import { DocumentError, FORMAT_VERSION, parseDocumentText,
         serializeDocument } from "./document.js";
import type { AttrValue, GraphDocument, ValidationIssue,
              ValidationReport } from "./types.js";

export interface PlacedNode {
  id: string;
  kind: string;
  attributes: Record<string, AttrValue>;
  x: number;
  y: number;
  bias?: string;
}

export interface Wire {
  tail: string;
  head: string;
  kind: string;
  attributes: Record<string, AttrValue>;
  weight?: string;
}

export type Selection =
  | { type: "node"; id: string }
  | { type: "wire"; tail: string; head: string }
  | null;

export interface Diagnostics {
  /** Whether these diagnostics reflect the current drawing. */
  stale: boolean;
  report: ValidationReport | null;
}

export class EditorState {
  nodes: PlacedNode[] = [];
  wires: Wire[] = [];
  selection: Selection = null;
  diagnostics: Diagnostics = { stale: true, report: null };
  metadata: Record<string, unknown> = { name: "untitled", seed: 0 };
  revision = 0;
  /** Exports carry positions only once the user (or an imported document)
      actually placed nodes; auto-layout stays out of the file so imported
      documents round-trip byte-exactly. */
  positionsExplicit = false;

  private bump() {
    this.revision += 1;
    this.diagnostics = { ...this.diagnostics, stale: true };
  }

  node(id: string): PlacedNode | undefined {
    return this.nodes.find((n) => n.id === id);
  }

  wire(tail: string, head: string): Wire | undefined {
    return this.wires.find((w) => w.tail === tail && w.head === head);
  }

  freshId(prefix: string): string {
    let i = 1;
    while (this.node(`${prefix}${i}`)) i += 1;
    return `${prefix}${i}`;
  }

  addNode(kind: string, attributes: Record<string, AttrValue>, x: number,
          y: number, id?: string): PlacedNode {
    const nodeId = id ?? this.freshId(kind.startsWith("data") ? "x" : "n");
    if (this.node(nodeId)) throw new Error(`node "${nodeId}" already exists`);
    const node: PlacedNode = { id: nodeId, kind, attributes: { ...attributes },
                               x, y };
    this.nodes.push(node);
    this.positionsExplicit = true;
    this.bump();
    return node;
  }

  removeNode(id: string) {
    this.nodes = this.nodes.filter((n) => n.id !== id);
    this.wires = this.wires.filter((w) => w.tail !== id && w.head !== id);
    if (this.selection?.type === "node" && this.selection.id === id) {
      this.selection = null;
    }
    this.bump();
  }

  connect(tail: string, head: string, kind: string,
          attributes: Record<string, AttrValue> = {}): Wire {
    if (!this.node(tail)) throw new Error(`unknown node "${tail}"`);
    if (!this.node(head)) throw new Error(`unknown node "${head}"`);
    if (tail === head) throw new Error("a connection needs two distinct nodes");
    if (this.wire(tail, head)) {
      throw new Error(`"${tail}" and "${head}" are already connected`);
    }
    const wire: Wire = { tail, head, kind, attributes: { ...attributes } };
    this.wires.push(wire);
    this.bump();
    return wire;
  }

  removeWire(tail: string, head: string) {
    this.wires = this.wires.filter((w) => !(w.tail === tail && w.head === head));
    if (this.selection?.type === "wire" && this.selection.tail === tail
        && this.selection.head === head) {
      this.selection = null;
    }
    this.bump();
  }

  setNodeAttribute(id: string, name: string, value: AttrValue) {
    const node = this.node(id);
    if (!node) throw new Error(`unknown node "${id}"`);
    node.attributes = { ...node.attributes, [name]: value };
    // Attribute edits invalidate any inlined parameter payload.
    delete node.bias;
    this.bump();
  }

  setWireAttribute(tail: string, head: string, name: string, value: AttrValue) {
    const wire = this.wire(tail, head);
    if (!wire) throw new Error(`unknown wire ${tail}->${head}`);
    wire.attributes = { ...wire.attributes, [name]: value };
    delete wire.weight;
    this.bump();
  }

  moveNode(id: string, x: number, y: number) {
    const node = this.node(id);
    if (!node) return;
    node.x = x;
    node.y = y;
    this.positionsExplicit = true;
    this.revision += 1; // geometry only; diagnostics stay fresh
  }

  applyDiagnostics(report: ValidationReport, forRevision: number) {
    this.diagnostics = { stale: forRevision !== this.revision, report };
  }

  markDiagnosticsUnreachable() {
    // Server unreachable: keep the last report but flag it as stale.
    this.diagnostics = { ...this.diagnostics, stale: true };
  }

  issuesFor(target: Selection): ValidationIssue[] {
    const report = this.diagnostics.report;
    if (!report || report.valid || !report.errors || !target) return [];
    return report.errors.filter((issue) => {
      if (target.type === "node") {
        return issue.kind === "vertex" && issue.at === target.id;
      }
      return issue.kind === "edge" && Array.isArray(issue.at)
        && issue.at[0] === target.tail && issue.at[1] === target.head;
    });
  }

  // --- document interchange ----------------------------------------------------

  toDocument(): GraphDocument {
    const metadata: Record<string, unknown> = { ...this.metadata };
    if (this.positionsExplicit) {
      const positions: Record<string, [number, number]> = {};
      for (const n of this.nodes) {
        positions[n.id] = [Math.round(n.x), Math.round(n.y)];
      }
      metadata.positions = positions;
    }
    return {
      format_version: FORMAT_VERSION,
      metadata,
      capsules: this.nodes.map((n) => ({
        id: n.id, kind: n.kind, attributes: { ...n.attributes },
        ...(n.bias !== undefined ? { bias: n.bias } : {}),
      })),
      connections: this.wires.map((w) => ({
        tail: w.tail, head: w.head, kind: w.kind,
        ...(Object.keys(w.attributes).length > 0
          ? { attributes: { ...w.attributes } } : {}),
        ...(w.weight !== undefined ? { weight: w.weight } : {}),
      })),
    };
  }

  exportText(): string {
    return serializeDocument(this.toDocument());
  }

  /** Replace the whole state from a document; throws DocumentError on bad
      input without touching the current state. */
  importText(text: string) {
    const doc = parseDocumentText(text);
    this.importDocument(doc);
  }

  importDocument(doc: GraphDocument) {
    const positions = (doc.metadata.positions ?? {}) as
      Record<string, [number, number]>;
    const nodes: PlacedNode[] = doc.capsules.map((c, i) => {
      const pos = positions[c.id];
      return {
        id: c.id, kind: c.kind, attributes: { ...c.attributes },
        x: pos ? pos[0] : 80 + i * 170,
        y: pos ? pos[1] : 120,
        ...(c.bias !== undefined ? { bias: c.bias } : {}),
      };
    });
    const wires: Wire[] = doc.connections.map((c) => ({
      tail: c.tail, head: c.head, kind: c.kind,
      attributes: { ...(c.attributes ?? {}) },
      ...(c.weight !== undefined ? { weight: c.weight } : {}),
    }));
    const metadata = { ...doc.metadata };
    delete metadata.positions;
    this.nodes = nodes;
    this.wires = wires;
    this.metadata = metadata;
    this.positionsExplicit = Object.keys(positions).length > 0;
    this.selection = null;
    this.bump();
  }
}

export { DocumentError };
