from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(2, 2)
qc.x(0)
qc.x(1)
if pad:
    qc.id(1)
ident = identify(qc)
qc.measure([0, 1], [0, 1])
