// Wire-format types shared with the capsforge service.

export type AttrValue = number | string | number[];

export interface DocumentCapsule {
  id: string;
  kind: string;
  attributes: Record<string, AttrValue>;
  bias?: string; // base64 payload
}

export interface DocumentConnection {
  tail: string;
  head: string;
  kind: string;
  attributes?: Record<string, AttrValue>;
  weight?: string;
}

export interface GraphDocument {
  format_version: string;
  metadata: Record<string, unknown>;
  capsules: DocumentCapsule[];
  connections: DocumentConnection[];
}

// --- symbol catalog (GET /api/symbols) ---------------------------------------

export interface AttributeSchema {
  name: string;
  type: "int" | "int_pair" | "dtype" | "float";
  required?: boolean;
  default?: AttrValue;
  min?: number;
  choices?: string[];
}

export interface SymbolDef {
  name: string;
  category: "capsule" | "connection" | "plain";
  label: string;
  attributes: AttributeSchema[];
  back_end?: { rank: number };
  front_end?: { rank: number };
  weight_doc?: string;
}

export interface Catalog {
  capsules: SymbolDef[];
  connections: SymbolDef[];
  plain: SymbolDef[];
}

// --- validation (POST /api/validate) ------------------------------------------

export interface ValidationIssue {
  code: string;
  kind: "vertex" | "edge" | "field";
  at: string | [string, string];
  message: string;
}

export interface ValidationReport {
  valid: boolean;
  shapes?: Record<string, number[]>;
  classification?: "layered" | "skip";
  errors?: ValidationIssue[];
}

// --- jobs ------------------------------------------------------------------------

export interface TrainSettings {
  learning_rate: number;
  max_iter: number;
  loss: "sse" | "cross_entropy";
  seed: number;
  log_stride?: number;
}

export interface JobRecord {
  id: string;
  document_hash: string;
  state: "pending" | "running" | "finished" | "failed";
  created: number;
  updated: number;
  loss_rows: number;
  final_loss?: number;
  error?: string;
  metrics?: { pairs: number; mean_loss: number; accuracy?: number;
              correct?: number; classified?: number };
  checkpoint_url?: string;
}

// The loss is null when a diverged iteration produced a non-finite value.
export type LossRow = [number, number | null];
