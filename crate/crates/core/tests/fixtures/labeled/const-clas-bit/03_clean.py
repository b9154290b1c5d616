from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(3, 3)
qc.h(0)
qc.h(1)
qc.h(2)
for i in range(3):
    qc.measure(i, i)
