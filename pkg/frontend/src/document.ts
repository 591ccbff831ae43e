// Canonical document handling: the editor must export byte-identical text to
// the service's own serializer, so imports/exports round-trip exactly.

import type { AttrValue, DocumentCapsule, DocumentConnection,
              GraphDocument } from "./types.js";

export const FORMAT_VERSION = "capsforge/1";

function sortedRecord<T>(rec: Record<string, T>): Record<string, T> {
  const out: Record<string, T> = {};
  for (const key of Object.keys(rec).sort()) out[key] = rec[key];
  return out;
}

function canonValue(v: unknown): unknown {
  if (Array.isArray(v)) return v.map(canonValue);
  if (v !== null && typeof v === "object") {
    return sortedRecord(
      Object.fromEntries(
        Object.entries(v as Record<string, unknown>)
          .map(([k, x]) => [k, canonValue(x)])));
  }
  return v;
}

/** Fixed field order + sorted open maps, mirroring the service serializer. */
export function canonicalDocumentObject(doc: GraphDocument): unknown {
  return {
    format_version: doc.format_version,
    metadata: canonValue(doc.metadata),
    capsules: doc.capsules.map((c) => {
      const entry: Record<string, unknown> = {
        id: c.id, kind: c.kind, attributes: canonValue(c.attributes),
      };
      if (c.bias !== undefined) entry.bias = c.bias;
      return entry;
    }),
    connections: doc.connections.map((c) => {
      const entry: Record<string, unknown> = {
        tail: c.tail, head: c.head, kind: c.kind,
      };
      if (c.attributes && Object.keys(c.attributes).length > 0) {
        entry.attributes = canonValue(c.attributes);
      }
      if (c.weight !== undefined) entry.weight = c.weight;
      return entry;
    }),
  };
}

export function serializeDocument(doc: GraphDocument): string {
  return JSON.stringify(canonicalDocumentObject(doc), null, 2) + "\n";
}

export function canonicallyEqual(a: GraphDocument, b: GraphDocument): boolean {
  return serializeDocument(a) === serializeDocument(b);
}

export class DocumentError extends Error {
  constructor(public path: string, message: string) {
    super(`${path}: ${message}`);
  }
}

/** Structural parse of document text; attribute semantics stay server-side. */
export function parseDocumentText(text: string): GraphDocument {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new DocumentError("$", `not valid JSON (${(e as Error).message})`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new DocumentError("$", "document must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  if (obj.format_version !== FORMAT_VERSION) {
    throw new DocumentError("format_version",
      `expected "${FORMAT_VERSION}", got ${JSON.stringify(obj.format_version)}`);
  }
  const metadata = (obj.metadata ?? {}) as Record<string, unknown>;
  if (typeof metadata !== "object" || Array.isArray(metadata)) {
    throw new DocumentError("metadata", "must be an object");
  }
  if (!Array.isArray(obj.capsules) || obj.capsules.length === 0) {
    throw new DocumentError("capsules", "a network requires at least one capsule");
  }
  const ids = new Set<string>();
  const capsules: DocumentCapsule[] = obj.capsules.map((c, i) => {
    const path = `capsules[${i}]`;
    const entry = c as Record<string, unknown>;
    if (typeof entry?.id !== "string") throw new DocumentError(path, "needs a string id");
    if (ids.has(entry.id)) throw new DocumentError(path, `duplicate id "${entry.id}"`);
    ids.add(entry.id);
    if (typeof entry.kind !== "string") throw new DocumentError(path, "needs a kind");
    const out: DocumentCapsule = {
      id: entry.id,
      kind: entry.kind,
      attributes: (entry.attributes ?? {}) as Record<string, AttrValue>,
    };
    if (typeof entry.bias === "string") out.bias = entry.bias;
    return out;
  });
  const rawConns = (obj.connections ?? []) as unknown[];
  if (!Array.isArray(rawConns)) throw new DocumentError("connections", "must be a list");
  const connections: DocumentConnection[] = rawConns.map((c, i) => {
    const path = `connections[${i}]`;
    const entry = c as Record<string, unknown>;
    for (const side of ["tail", "head"] as const) {
      if (typeof entry?.[side] !== "string") {
        throw new DocumentError(`${path}.${side}`, "needs a string id");
      }
      if (!ids.has(entry[side] as string)) {
        throw new DocumentError(`${path}.${side}`,
          `unknown capsule "${entry[side]}"`);
      }
    }
    if (typeof entry.kind !== "string") throw new DocumentError(path, "needs a kind");
    const out: DocumentConnection = {
      tail: entry.tail as string, head: entry.head as string, kind: entry.kind,
    };
    if (entry.attributes && typeof entry.attributes === "object") {
      out.attributes = entry.attributes as Record<string, AttrValue>;
    }
    if (typeof entry.weight === "string") out.weight = entry.weight;
    return out;
  });
  return { format_version: FORMAT_VERSION, metadata, capsules, connections };
}
