from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(2, 2)
qc.x(0)
qc.x(1)
if pad:
    qc.iden(1)  # expect: old-iden-gate
qc.measure([0, 1], [0, 1])
